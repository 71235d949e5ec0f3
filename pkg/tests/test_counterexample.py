import math

import numpy as np
import pytest

from cat_lab.core.errors import BoundViolationError, ConfigError, PreconditionError
from cat_lab.core.estimator import AbilityEstimate
from cat_lab.experiments import counterexample
from cat_lab.experiments.counterexample import (
    TRACE_COLUMNS,
    DivergenceScenario,
    bounded_info_demo,
    check_example_conditions,
    divergent_trajectory,
    find_n0,
    log_prob_event_A,
    tail_sum,
)


@pytest.fixture(scope="module")
def trace():
    return divergent_trajectory(DivergenceScenario())


class TestFindN0:
    def test_unit_step(self):
        assert find_n0(1.0) == 13

    def test_twelve_fails_cubes_condition(self):
        conditions = check_example_conditions(12, 1.0)
        assert (conditions.cubes_lhs, conditions.cubes_rhs) == (6591, 6084)
        assert conditions.tail_ok and conditions.jump_ok
        assert not conditions.all_hold

    def test_thirteen_holds(self):
        conditions = check_example_conditions(13, 1.0)
        assert (conditions.cubes_lhs, conditions.cubes_rhs) == (8232, 8281)
        assert conditions.all_hold

    def test_tail_paths_agree(self):
        assert check_example_conditions(13, 1.0).tail == pytest.approx(tail_sum(14), rel=1e-9)

    def test_tail_sum_small_start(self):
        assert tail_sum(1) == pytest.approx(sum(k ** 3 / (1 + math.exp(k)) for k in range(1, 200)), rel=1e-12)

    @pytest.mark.parametrize("eps0", [0.0, -1.0])
    def test_rejects_nonpositive_step(self, eps0):
        with pytest.raises(ConfigError):
            find_n0(eps0)


class TestScenario:
    def test_default_resolves_n0(self):
        assert DivergenceScenario().n0 == 13

    @pytest.mark.parametrize("kwargs", [
        {"theta0": -2.0},
        {"theta0": -2.6},
        {"eps0": 0.0},
        {"horizon": 0},
        {"n0": 12},
    ])
    def test_preconditions(self, kwargs):
        with pytest.raises(PreconditionError):
            DivergenceScenario(**kwargs)

    def test_policy_uses_cubic_ladder(self):
        policy = DivergenceScenario().policy
        assert policy.b1 == -2.7
        assert policy.counterexample_mode


class TestTrajectory:
    def test_passes_all_checks(self, trace):
        assert trace.passed
        assert len(trace.records) == 200
        assert all(record.bound_ok for record in trace.records)
        assert all(record.below_theta_minus_1 for record in trace.records)

    def test_forced_responses(self, trace):
        assert [r.y for r in trace.records[:13]] == [0] * 13
        assert all(r.y == 1 for r in trace.records[13:])

    def test_ladder_phase(self, trace):
        assert trace.theta_at(0) == -2.7
        assert trace.theta_at(13) == pytest.approx(-15.7)
        assert trace.records[0].b == -2.7
        assert trace.records[12].b == pytest.approx(-14.7)
        assert trace.records[13].a == 14 ** 3
        assert math.isnan(trace.records[12].bound_a13)

    def test_bounds_after_n0(self, trace):
        assert trace.theta_at(14) <= -2.7
        assert trace.theta_at(14) <= -2.7 + 1 / 196 + 1e-9
        estimates = [trace.theta_at(k) for k in range(14, 201)]
        assert all(later >= earlier - 1e-9 for earlier, later in zip(estimates, estimates[1:]))
        assert max(estimates) < -1.0

    def test_adaptive_items_use_previous_estimate(self, trace):
        for k in range(14, 201):
            assert trace.records[k - 1].b == trace.theta_at(k - 1)

    def test_short_horizon(self, tmp_path):
        short = divergent_trajectory(DivergenceScenario(horizon=50))
        path = tmp_path / "trace.csv"
        short.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(TRACE_COLUMNS)
        assert len(lines) == 51

    def test_strict_mode_raises_on_violation(self, monkeypatch):
        monkeypatch.setattr(counterexample, "solve_ability", lambda *args, **kwargs: AbilityEstimate(0.5, 1.0))
        with pytest.raises(BoundViolationError) as info:
            divergent_trajectory(DivergenceScenario(horizon=20))
        assert info.value.step == 14

    def test_lenient_mode_collects_violations(self, monkeypatch):
        monkeypatch.setattr(counterexample, "solve_ability", lambda *args, **kwargs: AbilityEstimate(0.5, 1.0))
        lenient = divergent_trajectory(DivergenceScenario(horizon=20), strict=False)
        assert not lenient.passed
        assert lenient.violations[0].startswith("step 14")
        assert len(lenient.records) == 20


class TestEventProbability:
    def test_finite_and_negative(self, trace):
        value = log_prob_event_A(trace, 0.0)
        assert math.isfinite(value)
        assert value < 0.0

    def test_first_term(self, trace):
        assert trace.records[0].log_prob_term == pytest.approx(-math.log1p(math.exp(2.7)), rel=1e-12)

    def test_matches_record_terms(self, trace):
        assert log_prob_event_A(trace, 0.0) == pytest.approx(sum(r.log_prob_term for r in trace.records))

    def test_tail_terms_vanish(self):
        short = divergent_trajectory(DivergenceScenario(horizon=50))
        long = divergent_trajectory(DivergenceScenario(horizon=100))
        assert log_prob_event_A(long, 0.0) == pytest.approx(log_prob_event_A(short, 0.0), rel=1e-12)


class TestBoundedInformation:
    def test_information_stays_bounded(self):
        report = bounded_info_demo(200, 200, seed=42)
        assert report.bound_holds
        assert report.info_bound < math.pi ** 2 / 24
        assert report.early_n == 20
        assert report.error_ratio > 0.8

    def test_deterministic_bound_for_every_length(self):
        partial = 0.25 * np.cumsum(1.0 / np.arange(1, 10001) ** 2)
        assert np.all(partial < math.pi ** 2 / 24)

    def test_rejects_short_tests(self):
        with pytest.raises(ConfigError):
            bounded_info_demo(5, 10, seed=1)
