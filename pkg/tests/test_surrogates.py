import numpy as np
import pytest

import rategames as rg
from rategames.surrogates import SurrogateEvaluator, SurrogateRate
from rategames.exceptions import EmptySelectionError

from conftest import central_difference, random_models


def one_example_ds(x, label=1):
    return rg.Dataset(np.array([[float(x)]]), [label])


class TestValues:
    def test_upper_margin_two(self):
        ds = one_example_ds(2.0, label=1)
        sr = SurrogateRate(rg.RateDefinition(target="predict-positive",
                                             sense="increasing"), "upper")
        val = rg.surrogate_value(rg.LinearModel(np.array([1.0]), 0.0), sr, ds)
        assert val == 3.0
        assert val >= 1.0  # indicator is 1

    def test_lower_margin_minus_two(self):
        ds = one_example_ds(2.0, label=1)
        sr = SurrogateRate(rg.RateDefinition(target="predict-positive",
                                             sense="decreasing"), "lower")
        val = rg.surrogate_value(rg.LinearModel(np.array([-1.0]), 0.0), sr, ds)
        assert val == -2.0
        assert val <= 0.0  # indicator is 0

    def test_lower_margin_half(self):
        ds = one_example_ds(0.5, label=1)
        sr = SurrogateRate(rg.RateDefinition(target="predict-positive",
                                             sense="decreasing"), "lower")
        val = rg.surrogate_value(rg.LinearModel(np.array([1.0]), 0.0), sr, ds)
        assert val == 0.5
        assert val <= 1.0  # indicator is 1

    def test_side_from_sense(self):
        up = SurrogateRate.for_sense(rg.RateDefinition(target="agree", sense="increasing"))
        lo = SurrogateRate.for_sense(rg.RateDefinition(target="agree", sense="decreasing"))
        assert (up.bound_side, lo.bound_side) == ("upper", "lower")

    def test_empty_selection(self):
        ds = one_example_ds(1.0, label=1)
        sr = SurrogateRate(rg.RateDefinition(target="agree", label=-1), "upper")
        with pytest.raises(EmptySelectionError):
            rg.surrogate_value(rg.LinearModel(np.array([1.0]), 0.0), sr, ds)


class TestSubgradients:
    def test_linear_region_mean(self):
        X = np.array([[0.1], [0.2]])
        ds = rg.Dataset(X, [1, 1])
        sr = SurrogateRate(rg.RateDefinition(target="agree", sense="increasing"), "upper")
        grad = rg.surrogate_subgrad(rg.LinearModel(np.array([1.0]), 0.0), sr, ds)
        np.testing.assert_allclose(grad, [X.mean(), 1.0])

    def test_flat_region_zero(self):
        ds = rg.Dataset(np.array([[5.0], [6.0]]), [1, 1])
        # upper side flat for margins <= -1
        sr = SurrogateRate(rg.RateDefinition(target="predict-positive",
                                             sense="increasing"), "upper")
        grad = rg.surrogate_subgrad(rg.LinearModel(np.array([-2.0]), 0.0), sr, ds)
        np.testing.assert_array_equal(grad, [0.0, 0.0])

    @pytest.mark.parametrize("side,sense", [("upper", "increasing"), ("lower", "decreasing")])
    def test_matches_finite_differences(self, small_ds, side, sense):
        rng = np.random.default_rng(3)
        sr = SurrogateRate(rg.RateDefinition(target="agree", sense=sense), side)
        for _ in range(10):
            theta = rng.normal(0, 1.5, 4)
            margins = small_ds.labels * (small_ds.features @ theta[:-1] + theta[-1])
            kink = 1.0 + margins if side == "upper" else 1.0 - margins
            if np.min(np.abs(kink)) < 1e-3:
                continue  # stay off hinge kinks
            model = rg.LinearModel(theta[:-1], theta[-1])
            grad = rg.surrogate_subgrad(model, sr, small_ds)

            def value(t):
                return rg.surrogate_value(rg.LinearModel(t[:-1], t[-1]), sr, small_ds)

            fd = central_difference(value, theta)
            np.testing.assert_allclose(grad, fd, atol=1e-4)


class TestBoundProperties:
    def test_pointwise_bounds_exact(self, small_ds):
        rng = np.random.default_rng(5)
        rdefs = [rg.RateDefinition(target="agree"),
                 rg.RateDefinition(target="predict-positive", label=1),
                 rg.RateDefinition(target="predict-negative", group=0)]
        for model in random_models(rng, 3, 1000, scale=3.0):
            for rdef in rdefs:
                exact = rg.evaluate_rate(model, rdef, small_ds)
                upper = rg.surrogate_value(model, SurrogateRate(rdef, "upper"), small_ds)
                lower = rg.surrogate_value(model, SurrogateRate(rdef, "lower"), small_ds)
                assert upper >= exact
                assert lower <= exact

    def test_convexity_along_segments(self, small_ds):
        rng = np.random.default_rng(6)
        rdef = rg.RateDefinition(target="agree")
        for _ in range(50):
            t1 = rng.normal(0, 2, 4)
            t2 = rng.normal(0, 2, 4)
            mid = 0.5 * (t1 + t2)
            for side, cmp in (("upper", 1.0), ("lower", -1.0)):
                sr = SurrogateRate(rdef, side)
                vals = [rg.surrogate_value(rg.LinearModel(t[:-1], t[-1]), sr, small_ds)
                        for t in (t1, t2, mid)]
                # upper convex, lower concave
                assert cmp * vals[2] <= cmp * 0.5 * (vals[0] + vals[1]) + 1e-10

    def test_lower_surrogate_may_be_negative(self, small_ds):
        big = rg.LinearModel(np.array([-50.0, 0.0, 0.0]), -10.0)
        sr = SurrogateRate(rg.RateDefinition(target="predict-positive",
                                             sense="decreasing"), "lower")
        assert rg.surrogate_value(big, sr, small_ds) < 0


class TestEvaluatorAssembly:
    def test_combined_gradient_matches_sum(self, small_ds):
        rdefs = [rg.RateDefinition(target="agree"),
                 rg.RateDefinition(target="predict-positive", label=1)]
        ev = SurrogateEvaluator(rdefs, small_ds)
        model = rg.LinearModel(np.array([0.4, -0.6, 0.2]), 0.1)
        scores = model.scores(small_ds)
        coeffs = np.array([1.3, -0.7])
        combined = ev.grad_from_coeffs(scores, coeffs)
        parts = (coeffs[0] * rg.surrogate_subgrad(model, SurrogateRate(rdefs[0], "upper"), small_ds)
                 + coeffs[1] * rg.surrogate_subgrad(model, SurrogateRate(rdefs[1], "lower"), small_ds))
        np.testing.assert_allclose(combined, parts, atol=1e-12)

    def test_allow_empty_skips(self):
        ds = rg.Dataset(np.array([[1.0], [2.0]]), [-1, -1])
        rdefs = [rg.RateDefinition(target="agree", label=1, name="tpr")]
        ev = SurrogateEvaluator(rdefs, ds, allow_empty=True)
        scores = np.array([1.0, -1.0])
        assert np.isnan(ev.indicator_rates(scores)[0])
        assert ev.value_from_coeffs(scores, np.array([2.0])) == 0.0
        np.testing.assert_array_equal(ev.grad_from_coeffs(scores, np.array([2.0])),
                                      np.zeros(2))
