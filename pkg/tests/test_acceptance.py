"""
Audit Monte Carlo a scala piena, esclusi dalla suite di default

    pytest -m slow
"""

import math

import pytest

from cat_lab.core.irt_core import ModelKind
from cat_lab.design.designer import ConstantGuessing, DesignPolicy, LinearAscending, LinearDescending
from cat_lab.experiments.counterexample import DivergenceScenario, bounded_info_demo, divergent_trajectory, log_prob_event_A
from cat_lab.experiments.simulator import SimulationConfig, mse_compare, run_replications

pytestmark = pytest.mark.slow


def test_rasch_full_scale():
    config = SimulationConfig(policy=DesignPolicy.rasch(), n_items=400, replications=2000, master_seed=42)
    final = run_replications(config).final()
    assert final["variance"] == pytest.approx(0.01, rel=0.15)
    assert 0.97 <= final["info_ratio"] <= 1.03
    assert final["ks_stat"] < 0.05


def test_two_pl_ascending_full_scale():
    config = SimulationConfig(model=ModelKind.TWO_PL, policy=DesignPolicy(a_schedule=LinearAscending(0.5, 2.0)),
                              n_items=400, replications=2000, master_seed=42)
    final = run_replications(config).final()
    assert final["std_err_var"] == pytest.approx(1.0, rel=0.10)
    assert final["ks_stat"] < 0.05


def test_three_pl_full_scale():
    config = SimulationConfig(model=ModelKind.THREE_PL, policy=DesignPolicy(c_rule=ConstantGuessing(0.2)),
                              n_items=600, replications=2000, master_seed=42)
    final = run_replications(config).final()
    assert final["std_err_var"] == pytest.approx(1.0, rel=0.15)
    assert final["fallback_count"] == 0


def test_divergence_certificate():
    trace = divergent_trajectory(DivergenceScenario(horizon=200))
    assert trace.n0 == 13
    assert trace.passed
    assert math.isfinite(log_prob_event_A(trace, 0.0))


def test_bounded_information_full_scale():
    report = bounded_info_demo(2000, 1000, seed=42)
    assert report.bound_holds
    assert report.early_n == 200
    assert report.error_ratio > 0.8


def test_ascending_discrimination_beats_descending():
    common = dict(model=ModelKind.TWO_PL, n_items=30, replications=5000, master_seed=42)
    comparison = mse_compare(
        SimulationConfig(policy=DesignPolicy(a_schedule=LinearAscending(0.5, 2.0)), **common),
        SimulationConfig(policy=DesignPolicy(a_schedule=LinearDescending(2.0, 0.5)), **common),
    )
    assert comparison.ascending_wins
