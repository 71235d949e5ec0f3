import logging
import math

import numpy as np
import pytest

from cat_lab.core.errors import ConfigError
from cat_lab.core.irt_core import Item, ModelKind
from cat_lab.design.designer import (
    Constant,
    ConstantGuessing,
    CubicDivergent,
    DesignPolicy,
    DifficultyRule,
    Explicit,
    FiniteBank,
    LinearAscending,
    LinearDescending,
    ladder_difficulty,
)
from cat_lab.experiments.simulator import (
    CSV_COLUMNS,
    SimulationConfig,
    _simulate_chunk,
    draw_response,
    ks_statistic,
    mse_compare,
    run_replications,
    run_session,
    simulate_replications,
)
from cat_lab.utils.seeding import stream_for


def rasch_config(**overrides):
    params = dict(policy=DesignPolicy.rasch(), n_items=40, replications=20, master_seed=7)
    params.update(overrides)
    return SimulationConfig(**params)


def two_pl_config(schedule, **overrides):
    params = dict(model=ModelKind.TWO_PL, policy=DesignPolicy(a_schedule=schedule),
                  n_items=30, replications=200, master_seed=11)
    params.update(overrides)
    return SimulationConfig(**params)


class TestDrawResponse:
    def test_frequency_matches_icc(self, rng):
        item = Item(a=1.0, b=0.0, c=0.2)
        draws = [draw_response(0.0, item, rng) for _ in range(20000)]
        assert np.mean(draws) == pytest.approx(0.6, abs=0.02)

    def test_deterministic_for_same_stream(self):
        item = Item.rasch(0.3)
        first = [draw_response(0.0, item, stream_for(5, 2)) for _ in range(3)]
        assert len(set(first)) == 1

    def test_consumes_one_uniform(self):
        one, other = stream_for(3, 0), stream_for(3, 0)
        draw_response(0.0, Item.rasch(0.0), one)
        other.random()
        assert one.random() == other.random()


class TestSimulationConfig:
    def test_default_checkpoints(self):
        assert SimulationConfig(policy=DesignPolicy.rasch(), n_items=400).checkpoints == (25, 50, 100, 200, 400)
        assert rasch_config(n_items=100).checkpoints == (25, 50, 100)
        assert rasch_config(n_items=30).checkpoints == (25, 30)
        assert rasch_config(n_items=10).checkpoints == (10,)

    @pytest.mark.parametrize("overrides", [
        {"checkpoints": (20, 10)},
        {"checkpoints": (10, 10)},
        {"checkpoints": (1, 10)},
        {"checkpoints": (10, 41)},
        {"n_items": 1},
        {"replications": 0},
        {"master_seed": -1},
        {"theta_true": math.inf},
        {"policy": DesignPolicy(a_schedule=Constant(2.0))},
        {"policy": DesignPolicy.rasch(eps0=0.0)},
    ])
    def test_rejects_invalid(self, overrides):
        with pytest.raises(ConfigError):
            rasch_config(**overrides)

    def test_guessing_requires_three_pl(self):
        with pytest.raises(ConfigError):
            two_pl_config(Constant(1.0), policy=DesignPolicy(c_rule=ConstantGuessing(0.2)))

    def test_explicit_schedule_must_cover_test(self):
        with pytest.raises(ConfigError):
            two_pl_config(Explicit((1.0,) * 5), n_items=10)

    def test_finite_bank_constraints(self):
        bank = FiniteBank(tuple(Item.rasch(b) for b in np.linspace(-2, 2, 10)))
        rasch_config(bank=bank, n_items=10, checkpoints=(10,))
        with pytest.raises(ConfigError):
            rasch_config(bank=bank, n_items=11)
        mixed = FiniteBank(bank.items + (Item(a=2.0),))
        with pytest.raises(ConfigError):
            rasch_config(bank=mixed, n_items=10, checkpoints=(10,))

    def test_counterexample_schedule_logs_warning(self, caplog):
        policy = DesignPolicy(a_schedule=CubicDivergent(), b_rule=DifficultyRule.PLAIN_THETA)
        with caplog.at_level(logging.WARNING, logger="cat_lab"):
            two_pl_config(CubicDivergent(), policy=policy, n_items=10, replications=2)
        assert "counterexample_mode" in caplog.text

    def test_regular_policy_logs_nothing(self, caplog):
        with caplog.at_level(logging.WARNING, logger="cat_lab"):
            rasch_config()
        assert caplog.records == []

    def test_to_dict_materializes_defaults(self):
        resolved = rasch_config().to_dict()
        assert resolved["checkpoints"] == [25, 40]
        assert resolved["policy"]["a_schedule"] == {"kind": "Constant", "a": 1.0}
        assert resolved["policy"]["b_rule"] == "offset"
        assert resolved["bank"] == {"kind": "idealized"}


class TestRunSession:
    def test_estimates_follow_first_flip(self):
        transcript = run_session(rasch_config(n_items=30), stream_for(7, 0))
        assert len(transcript) == 30
        assert transcript.k0 is not None
        assert transcript.check_invariants()

    def test_ladder_before_first_flip(self):
        config = rasch_config(theta_true=3.0, n_items=30)
        transcript = run_session(config, stream_for(7, 1))
        first = transcript.ys[0]
        for step in range(transcript.k0):
            expected = ladder_difficulty(config.policy, step, first if step else None)
            assert transcript.items[step].b == pytest.approx(expected)

    def test_adaptive_items_target_previous_estimate(self):
        transcript = run_session(rasch_config(n_items=40), stream_for(7, 2))
        for k in range(transcript.k0 + 1, 41):
            assert transcript.items[k - 1].b == pytest.approx(transcript.estimates[k - 2].value, abs=1e-12)

    def test_guessing_items_use_offset(self):
        config = SimulationConfig(model=ModelKind.THREE_PL, policy=DesignPolicy(c_rule=ConstantGuessing(0.2)),
                                  n_items=30, replications=1)
        transcript = run_session(config, stream_for(1, 0))
        k = transcript.k0 + 1
        previous = transcript.estimates[k - 2].value
        assert transcript.items[k - 1].b < previous
        assert all(item.c == 0.2 for item in transcript.items)


class TestBatchEngine:
    def test_matches_single_session(self):
        config = rasch_config(n_items=40, replications=4)
        batch = simulate_replications(config, threads=1)
        for i in range(4):
            transcript = run_session(config, stream_for(config.master_seed, i))
            record = batch.replication(i).at(40)
            assert record.theta_hat == pytest.approx(transcript.estimates[-1].value, abs=1e-9)
            assert not record.fallback

    def test_two_pl_matches_single_session(self):
        config = two_pl_config(LinearAscending(0.5, 2.0), replications=3)
        batch = simulate_replications(config, threads=1)
        for i in range(3):
            transcript = run_session(config, stream_for(config.master_seed, i))
            assert batch.replication(i).at(30).theta_hat == pytest.approx(transcript.estimates[-1].value, abs=1e-9)

    def test_deterministic(self):
        config = rasch_config(replications=50)
        first = simulate_replications(config, threads=1)
        second = simulate_replications(config, threads=1)
        for a, b in zip(first.checkpoints, second.checkpoints):
            assert np.array_equal(a.theta_hat, b.theta_hat)

    def test_thread_count_does_not_change_results(self):
        config = rasch_config(n_items=25, replications=300)
        single = simulate_replications(config, threads=1)
        pooled = simulate_replications(config, threads=4)
        assert np.array_equal(single.indices, np.arange(300))
        assert np.array_equal(single.at(25).theta_hat, pooled.at(25).theta_hat)
        assert np.array_equal(single.at(25).standardized_error, pooled.at(25).standardized_error)

    def test_row_independent_of_batch(self):
        config = rasch_config(n_items=25, replications=300)
        batch = simulate_replications(config, threads=1)
        alone = _simulate_chunk(config, np.array([260]))
        np.testing.assert_allclose(alone.at(25).theta_hat, batch.at(25).theta_hat[[260]], rtol=0, atol=1e-12)

    def test_provisional_estimate_before_first_flip(self):
        config = rasch_config(theta_true=30.0, n_items=10, replications=5, checkpoints=(2, 10))
        batch = simulate_replications(config, threads=1)
        early = batch.at(2)
        assert early.fallback.all()
        # nessuna risposta sbagliata: la stima provvisoria e' l'ultima difficolta' della ladder
        np.testing.assert_allclose(early.theta_hat, 1.0)

    def test_finite_bank_uses_each_item_once(self):
        bank = FiniteBank(tuple(Item.rasch(b) for b in np.linspace(-3, 3, 30)))
        config = rasch_config(bank=bank, n_items=30, replications=5, checkpoints=(30,))
        batch = simulate_replications(config, threads=1)
        transcript = run_session(config, stream_for(config.master_seed, 0))
        assert sorted(item.b for item in transcript.items) == sorted(item.b for item in bank.items)
        assert batch.replication(0).at(30).theta_hat == pytest.approx(transcript.estimates[-1].value, abs=1e-9)


class TestKsStatistic:
    def test_single_point_at_zero(self):
        assert ks_statistic([0.0]) == pytest.approx(0.5)

    def test_normal_sample(self, rng):
        assert ks_statistic(rng.standard_normal(5000)) < 0.03

    def test_shifted_sample(self, rng):
        assert ks_statistic(rng.standard_normal(5000) + 1.0) > 0.3

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_statistic([])


class TestSummaryTable:
    def test_columns_and_rows(self, tmp_path):
        table = run_replications(rasch_config(), threads=1)
        assert table.checkpoints == [25, 40]
        path = tmp_path / "summary.csv"
        table.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == 3
        assert lines[1].startswith("25,")

    def test_aggregates(self):
        config = rasch_config(replications=60)
        table = run_replications(config, threads=1)
        estimates = simulate_replications(config, threads=1).at(40).theta_hat
        row = table.row(40)
        assert row["bias"] == pytest.approx(np.mean(estimates))
        assert row["variance"] == pytest.approx(np.var(estimates, ddof=1))
        assert row["mse"] == pytest.approx(np.mean(estimates ** 2))
        assert row["fallback_count"] == 0

    def test_info_ratio_only_for_rasch(self):
        rasch = run_replications(rasch_config(), threads=1)
        two_pl = run_replications(two_pl_config(Constant(1.5), replications=20), threads=1)
        assert 0.0 < rasch.final()["info_ratio"] <= 1.0 + 1e-9
        assert math.isnan(two_pl.final()["info_ratio"])

    def test_information_normalized_errors(self):
        config = rasch_config(replications=60)
        row = run_replications(config, threads=1).row(40)
        arrays = simulate_replications(config, threads=1).at(40)
        by_hat = np.sqrt(arrays.observed_info) * arrays.theta_hat
        by_true = np.sqrt(arrays.info_at_true) * arrays.theta_hat
        assert row["std_err_var_info_hat"] == pytest.approx(np.var(by_hat, ddof=1))
        assert row["std_err_var_info_true"] == pytest.approx(np.var(by_true, ddof=1))
        assert "std_err_var_info_hat" not in CSV_COLUMNS

    def test_single_replication(self):
        table = run_replications(rasch_config(replications=1), threads=1)
        assert math.isnan(table.final()["variance"])
        assert table.final()["n_replications"] == 1

    def test_missing_checkpoint(self):
        table = run_replications(rasch_config(), threads=1)
        with pytest.raises(KeyError):
            table.row(33)


class TestReducedAudits:
    def test_rasch_variance_and_information(self):
        table = run_replications(rasch_config(n_items=100, replications=500, master_seed=42))
        final = table.final()
        assert final["variance"] == pytest.approx(0.04, rel=0.25)
        assert 0.85 <= final["info_ratio"] <= 1.0 + 1e-9
        assert final["ks_stat"] < 0.1

    def test_two_pl_standardized_error(self):
        config = two_pl_config(LinearAscending(0.5, 2.0), n_items=100, replications=500)
        final = run_replications(config).final()
        assert final["std_err_var"] == pytest.approx(1.0, rel=0.25)
        assert final["std_err_var_info_hat"] == pytest.approx(1.0, rel=0.3)
        assert final["std_err_var_info_true"] == pytest.approx(1.0, rel=0.3)

    def test_three_pl_without_fallback(self):
        config = SimulationConfig(model=ModelKind.THREE_PL, policy=DesignPolicy(c_rule=ConstantGuessing(0.2)),
                                  n_items=200, replications=300, master_seed=42)
        final = run_replications(config).final()
        assert final["fallback_count"] == 0
        assert 0.6 < final["std_err_var"] < 1.5


class TestMseCompare:
    def test_paired_checkpoints(self):
        comparison = mse_compare(two_pl_config(LinearAscending(0.5, 2.0)),
                                 two_pl_config(LinearDescending(2.0, 0.5)), threads=1)
        paired = comparison.paired_frame()
        assert list(paired.columns) == ["n", "mse_ascending", "mse_descending"]
        assert list(paired["n"]) == [25, 30]
        assert isinstance(comparison.ascending_wins, bool)

    def test_checkpoints_must_match(self):
        with pytest.raises(ConfigError):
            mse_compare(two_pl_config(LinearAscending(0.5, 2.0)),
                        two_pl_config(LinearDescending(2.0, 0.5), checkpoints=(10, 30)))

    def test_only_schedule_may_differ(self):
        with pytest.raises(ConfigError):
            mse_compare(two_pl_config(LinearAscending(0.5, 2.0)),
                        two_pl_config(LinearDescending(2.0, 0.5), theta_true=1.0))
