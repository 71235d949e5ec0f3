import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from cat_lab.core.errors import InvalidItemError
from cat_lab.core.irt_core import (
    Item,
    ModelKind,
    fisher_info,
    icc,
    information_curve,
    logistic,
    max_info_closed_form,
    optimal_difficulty,
    weight,
)

A_GRID = np.linspace(0.2, 5.0, 20)
C_GRID = np.linspace(0.0, 0.5, 11)


class TestItem:
    @pytest.mark.parametrize("kwargs", [
        {"a": 0.0}, {"a": -1.0}, {"c": 1.0}, {"c": -0.1}, {"b": math.inf}, {"b": math.nan},
    ])
    def test_rejects_invalid_parameters(self, kwargs):
        with pytest.raises(InvalidItemError):
            Item(**kwargs)

    def test_invalid_item_is_a_value_error(self):
        with pytest.raises(ValueError):
            Item(a=0.0)

    def test_kind(self):
        assert Item.rasch(0.3).kind is ModelKind.RASCH
        assert Item(a=2.0).kind is ModelKind.TWO_PL
        assert Item(c=0.2).kind is ModelKind.THREE_PL

    def test_model_accepts(self):
        assert ModelKind.RASCH.accepts(Item.rasch(1.0))
        assert not ModelKind.RASCH.accepts(Item(a=2.0))
        assert ModelKind.TWO_PL.accepts(Item(a=2.0))
        assert not ModelKind.TWO_PL.accepts(Item(c=0.1))
        assert ModelKind.THREE_PL.accepts(Item(a=3.0, c=0.4))

    def test_model_from_name(self):
        assert ModelKind.from_name(" 3PL ") is ModelKind.THREE_PL
        with pytest.raises(ValueError):
            ModelKind.from_name("4pl")


class TestLogistic:
    def test_known_values(self):
        assert logistic(0.0) == 0.5
        assert logistic(math.log(3.0)) == pytest.approx(0.75, rel=1e-14)

    @pytest.mark.parametrize("t", [0.3, 5.0, 40.0])
    def test_complement(self, t):
        assert logistic(t) + logistic(-t) == pytest.approx(1.0, abs=1e-15)

    def test_saturates_without_overflow(self):
        assert logistic(1000.0) == 1.0
        assert 0.0 <= logistic(-1000.0) < 1e-300


class TestIcc:
    def test_rasch_at_difficulty(self):
        assert icc(0.7, Item.rasch(0.7)) == 0.5

    def test_guessing_item(self):
        assert icc(0.0, Item(a=1.0, b=0.0, c=0.2)) == pytest.approx(0.6)

    def test_lower_asymptote(self):
        assert icc(-1e4, Item(a=2.0, b=1.0, c=0.25)) == pytest.approx(0.25)

    def test_rasch_reduction(self):
        for theta in np.linspace(-3, 3, 13):
            assert icc(theta, Item.rasch(0.4)) == logistic(theta - 0.4)


class TestFisherInfo:
    def test_rasch_maximum(self):
        assert fisher_info(1.2, Item.rasch(1.2)) == pytest.approx(0.25)

    def test_two_pl_maximum(self):
        assert fisher_info(0.5, Item(a=3.0, b=0.5)) == pytest.approx(2.25)

    def test_guessing_at_optimal_difficulty(self):
        item = Item(a=1.0, b=optimal_difficulty(0.0, 1.0, 0.125), c=0.125)
        assert fisher_info(0.0, item) == pytest.approx(0.1965, abs=5e-5)

    def test_bounded_by_a_squared_over_four(self):
        thetas = np.linspace(-20, 20, 401)
        for a in A_GRID:
            info = information_curve(thetas, a, 0.0, 0.0)
            assert np.all(info >= 0.0)
            assert np.all(info <= a * a / 4.0 * (1 + 1e-12))

    def test_nonnegative_with_saturation(self):
        info = information_curve(np.array([-1e3, 0.0, 1e3]), 8000.0, 0.0, 0.3)
        assert np.all(np.isfinite(info))
        assert np.all(info >= 0.0)


class TestOptimalDifficulty:
    def test_no_guessing_returns_theta(self):
        assert optimal_difficulty(1.37, 2.0, 0.0) == 1.37

    def test_known_offset(self):
        assert optimal_difficulty(0.0, 1.0, 0.125) == pytest.approx(-0.18823, abs=1e-5)

    def test_scales_with_discrimination(self):
        assert optimal_difficulty(2.0, 2.0, 0.125) == pytest.approx(2.0 - 0.18823 / 2.0, abs=1e-5)

    def test_local_optimality_on_grid(self):
        for a in A_GRID:
            for c in C_GRID:
                for theta in (-1.5, 0.0, 2.0):
                    b_star = optimal_difficulty(theta, a, c)
                    best = information_curve(theta, a, b_star, c)
                    for delta in (1e-3, 0.1, 1.0):
                        assert best >= information_curve(theta, a, b_star + delta, c)
                        assert best >= information_curve(theta, a, b_star - delta, c)


class TestMaxInfoClosedForm:
    def test_known_values(self):
        assert max_info_closed_form(1.0, 0.0) == pytest.approx(0.25)
        assert max_info_closed_form(1.0, 0.125) == pytest.approx(0.19648, abs=1e-5)
        assert max_info_closed_form(2.0, 0.125) == pytest.approx(4 * max_info_closed_form(1.0, 0.125))

    def test_matches_information_at_optimal_difficulty(self):
        for a in A_GRID:
            for c in C_GRID:
                b_star = optimal_difficulty(0.3, a, c)
                closed = max_info_closed_form(a, c)
                assert information_curve(0.3, a, b_star, c) == pytest.approx(closed, rel=1e-10)

    def test_golden_section_confirms_global_maximum(self):
        for a in A_GRID:
            for c in C_GRID:
                result = minimize_scalar(lambda b: -information_curve(0.0, a, b, c),
                                         bracket=(-10.0, 0.0, 10.0), method="golden", tol=1e-10)
                assert -result.fun == pytest.approx(max_info_closed_form(a, c), rel=1e-6)

    def test_decreasing_in_guessing(self):
        values = [max_info_closed_form(1.5, c) for c in C_GRID]
        assert all(later < earlier for earlier, later in zip(values, values[1:]))


class TestWeight:
    def test_no_guessing(self):
        assert weight(1.7, 0.0) == pytest.approx(1.7, rel=1e-15)

    def test_known_value(self):
        assert weight(1.0, 0.25) == pytest.approx(0.84530, abs=1e-5)

    def test_identity(self):
        for a in A_GRID:
            for c in C_GRID:
                s = (1 + math.sqrt(1 + 8 * c)) / 2
                assert abs(weight(a, c) - a * s / (c + s)) < 1e-12

    def test_equals_raw_weight_at_optimal_difficulty(self):
        for c in C_GRID:
            a, theta = 1.3, 0.4
            t = a * (theta - optimal_difficulty(theta, a, c))
            raw = a * math.exp(t) / (c + math.exp(t))
            assert weight(a, c) == pytest.approx(raw, rel=1e-12)

    def test_decreasing_in_guessing(self):
        values = [weight(1.0, c) for c in np.arange(0.0, 0.51, 0.1)]
        assert all(later < earlier for earlier, later in zip(values, values[1:]))
