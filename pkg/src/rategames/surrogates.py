"""Hinge-based surrogate rates and their subgradients.

An increasing-sense rate gets a convex upper bound, a decreasing-sense rate a
concave lower bound, so that multiplier-weighted sums over model parameters
stay convex.  With signed margin m = target_sign * score:

    upper side:  mean max(0, 1 + m)   >= indicator rate (pointwise)
    lower side:  mean min(1, m)       <= indicator rate (pointwise)

The lower side may go negative for badly scaled models; downstream code must
tolerate that (only the model player ever sees surrogates).

Kink rule, fixed for determinism: the max(0, .) kink takes the zero-side
subgradient (active iff m > -1), the min(1, .) kink keeps the unit slope
(active iff m <= 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, RateDefinition
from .exceptions import EmptySelectionError


@dataclass(frozen=True)
class SurrogateRate:
    """A rate definition paired with its hinge bound side."""

    base: RateDefinition
    bound_side: str  # "upper" | "lower"

    def __post_init__(self):
        if self.bound_side not in ("upper", "lower"):
            raise ValueError(f"unknown bound side {self.bound_side!r}")

    @classmethod
    def for_sense(cls, base: RateDefinition) -> "SurrogateRate":
        side = "upper" if base.sense == "increasing" else "lower"
        return cls(base, side)


def _margins(model, rdef: RateDefinition, ds: Dataset):
    mask = rdef.selector_mask(ds)
    if not mask.any():
        raise EmptySelectionError(
            f"{rdef.describe()} selects no examples in dataset {ds.name!r}")
    scores = model.scores(ds)[mask]
    tsign = rdef.target_signs(ds.labels)[mask]
    return mask, tsign, tsign * scores


def surrogate_value(model, sr: SurrogateRate, ds: Dataset) -> float:
    """Mean hinge bound over the selected examples."""
    _, _, m = _margins(model, sr.base, ds)
    if sr.bound_side == "upper":
        return float(np.mean(np.maximum(0.0, 1.0 + m)))
    return float(np.mean(np.minimum(1.0, m)))


def surrogate_subgrad(model, sr: SurrogateRate, ds: Dataset) -> np.ndarray:
    """Subgradient of the surrogate value in (weights, bias) space."""
    mask, tsign, m = _margins(model, sr.base, ds)
    if sr.bound_side == "upper":
        active = m > -1.0
    else:
        active = m <= 1.0
    coef = np.zeros(m.size)
    coef[active] = tsign[active]
    coef /= m.size
    X = ds.features[mask]
    return np.append(X.T @ coef, coef.sum())


class SurrogateEvaluator:
    """Batched surrogate values and combined subgradients on one dataset.

    Assembles sum_k c_k * R~_k, with each rate's bound side chosen by the
    sign of its coefficient (c_k > 0 -> upper, c_k < 0 -> lower), which keeps
    the whole sum convex in the model parameters.
    """

    def __init__(self, rdefs, ds: Dataset, allow_empty: bool = False):
        self.rdefs = list(rdefs)
        self.ds = ds
        self.n = len(ds)
        self.masks = []
        self.tsigns = []
        self.sizes = []
        for rdef in self.rdefs:
            mask = rdef.selector_mask(ds)
            if not mask.any() and not allow_empty:
                raise EmptySelectionError(
                    f"{rdef.describe()} selects no examples in dataset {ds.name!r}")
            self.masks.append(mask)
            self.tsigns.append(rdef.target_signs(ds.labels)[mask])
            self.sizes.append(int(mask.sum()))

    def value_one(self, scores: np.ndarray, k: int, side: str) -> float:
        if self.sizes[k] == 0:
            return np.nan
        m = self.tsigns[k] * scores[self.masks[k]]
        if side == "upper":
            return float(np.mean(np.maximum(0.0, 1.0 + m)))
        return float(np.mean(np.minimum(1.0, m)))

    def indicator_rates(self, scores: np.ndarray) -> np.ndarray:
        """Exact rates from scores; nan marks selector-empty coordinates."""
        preds = np.where(np.asarray(scores) >= 0, 1, -1)
        out = np.full(len(self.rdefs), np.nan)
        for k, (mask, tsign) in enumerate(zip(self.masks, self.tsigns)):
            if self.sizes[k]:
                out[k] = float(np.mean(preds[mask] == tsign))
        return out

    def value_from_coeffs(self, scores: np.ndarray, coeffs: np.ndarray) -> float:
        """sum_k c_k * R~_k(theta) with side per coefficient sign."""
        total = 0.0
        for k, c in enumerate(coeffs):
            if c == 0.0 or self.sizes[k] == 0:
                continue
            side = "upper" if c > 0 else "lower"
            total += c * self.value_one(scores, k, side)
        return total

    def grad_from_coeffs(self, scores: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Subgradient of value_from_coeffs in (weights, bias) space.

        Folds all per-rate contributions into one per-example weight vector,
        so the cost is a single feature-matrix product.
        """
        w = np.zeros(self.n)
        for k, c in enumerate(coeffs):
            if c == 0.0 or self.sizes[k] == 0:
                continue
            mask = self.masks[k]
            m = self.tsigns[k] * scores[mask]
            if c > 0:
                active = m > -1.0
            else:
                active = m <= 1.0
            contrib = np.zeros(m.size)
            contrib[active] = self.tsigns[k][active]
            w[mask] += (c / self.sizes[k]) * contrib
        return np.append(self.ds.features.T @ w, w.sum())

    def values_for_sides(self, scores: np.ndarray, sides) -> np.ndarray:
        return np.array([self.value_one(scores, k, side)
                         for k, side in enumerate(sides)])
