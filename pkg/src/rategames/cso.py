"""Cost-sensitive optimization oracles for the oracle-based game.

An oracle takes the cost coefficients c of a weighted-rate objective
sum_k c_k R_k(theta) and returns a near-minimizer over its model space:
exact for candidate enumeration, plug-in (class-probability thresholding)
otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .data import Dataset, GroupwiseModel, LinearModel, RateDefinition, RateEvaluator
from .exceptions import ConfigError, DataError


@dataclass
class CsoOracle:
    """Routine minimizing a cost-weighted sum of rates over a model space.

    ``rho`` is the additive suboptimality certificate: 0 for enumeration,
    None ("unknown") for the plug-in, which is excluded from theory-facing
    checks.
    """

    solve_fn: object
    rho: float | None
    kind: str

    def solve(self, coeffs: np.ndarray):
        return self.solve_fn(np.asarray(coeffs, dtype=float))


def enumeration_oracle(candidates: list[LinearModel], rdefs: list[RateDefinition],
                       train: Dataset) -> CsoOracle:
    """Exact oracle scanning a finite candidate list; ties break to lowest index."""
    if not candidates:
        raise ConfigError("enumeration oracle needs at least one candidate")
    evaluator = RateEvaluator(rdefs, train)
    rate_matrix = np.stack([evaluator.rates(m) for m in candidates])

    def solve(coeffs: np.ndarray):
        values = rate_matrix @ coeffs
        return candidates[int(np.argmin(values))]

    return CsoOracle(solve, rho=0.0, kind="enumeration")


def fit_logistic(train: Dataset, steps: int = 2500, step_size: float = 1.0) -> LinearModel:
    """Full-batch gradient descent on the mean logistic loss; deterministic."""
    if train.p in (0.0, 1.0):
        raise DataError("cannot fit a class-probability model on a single-class dataset")
    n, d = train.features.shape
    y01 = (train.labels == 1).astype(float)
    theta = np.zeros(d + 1)
    X = train.features
    for _ in range(steps):
        scores = X @ theta[:-1] + theta[-1]
        resid = expit(scores) - y01
        theta[:-1] -= step_size * (X.T @ resid) / n
        theta[-1] -= step_size * resid.mean()
    return LinearModel(theta[:-1], theta[-1])


def plugin_oracle(train: Dataset, rdefs: list[RateDefinition], *,
                  steps: int = 2500, step_size: float = 1.0) -> CsoOracle:
    """Plug-in oracle: fit eta(x) once, then threshold per cost vector.

    Each solve converts the rate costs into expected per-example costs of
    predicting +1 vs -1 under eta, which reduces to a per-group decision
    d_g(x) = A_g * eta(x) + B_g <= 0; the induced classifier is returned as a
    per-group shifted (possibly flipped) linear model so downstream rate
    evaluation stays uniform.  Reference-prediction selectors are not
    supported here.
    """
    for rdef in rdefs:
        if rdef.ref is not None:
            raise ConfigError("plug-in oracle does not support reference-filtered rates")
    eta_model = fit_logistic(train, steps=steps, step_size=step_size)
    group_ids = [int(g) for g in train.group_ids]
    sizes = []
    for rdef in rdefs:
        mask = rdef.selector_mask(train)
        if not mask.any():
            raise ConfigError(f"{rdef.describe()} selects no training examples")
        sizes.append(int(mask.sum()))

    def solve(coeffs: np.ndarray) -> GroupwiseModel:
        shifts: dict[int, float] = {}
        scales: dict[int, float] = {}
        for g in group_ids:
            a_coef = 0.0
            b_coef = 0.0
            for k, rdef in enumerate(rdefs):
                c = coeffs[k]
                if c == 0.0 or (rdef.group is not None and rdef.group != g):
                    continue
                unit = c / sizes[k]
                # target signs under each latent label
                t_pos = 1.0 if rdef.target != "predict-negative" else -1.0
                t_neg = 1.0 if rdef.target == "predict-positive" else -1.0
                # d(x) = cost(+1) - cost(-1) = A*eta + B per cell
                if rdef.label != -1:
                    a_coef += unit * t_pos
                if rdef.label != 1:
                    a_coef -= unit * t_neg
                    b_coef += unit * t_neg
            scale, shift = _threshold_rule(a_coef, b_coef)
            scales[g] = scale
            shifts[g] = shift
        return GroupwiseModel(base=eta_model, shifts=shifts, scales=scales)

    return CsoOracle(solve, rho=None, kind="plugin")


def _threshold_rule(a_coef: float, b_coef: float) -> tuple[float, float]:
    """Turn d(eta) = a*eta + b <= 0 into (scale, shift) on the logit score.

    Predicts +1 on ties, matching the sign(0) := +1 rule.
    """
    if a_coef == 0.0:
        return (0.0, 1.0) if b_coef <= 0.0 else (0.0, -1.0)
    t = -b_coef / a_coef
    if a_coef < 0.0:
        # predict + iff eta >= t
        if t <= 0.0:
            return 0.0, 1.0
        if t >= 1.0:
            return 0.0, -1.0
        return 1.0, -float(logit(t))
    # a_coef > 0: predict + iff eta <= t
    if t >= 1.0:
        return 0.0, 1.0
    if t < 0.0:
        return 0.0, -1.0
    if t == 0.0:
        # eta <= 0 never holds strictly; eta == 0 unreachable for finite scores
        return 0.0, -1.0
    return -1.0, float(logit(t))
