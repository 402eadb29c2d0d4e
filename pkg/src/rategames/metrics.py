"""Convex rate metrics, constraint functions, and their best responses.

A metric is a scalar function of K rates with a fixed monotonicity sense per
coordinate.  The slack player's best response minimizes

    L1(xi; lam) = Phi(xi) + sum_k lam_k * sigma_k * xi_k

over the box [domain_floor, 1]^K, where sigma_k = -1 for increasing-sense
coordinates (decoupling term lam*(R - xi)) and +1 for decreasing-sense ones
(term lam*(xi - R)).  The box replaces the nonnegative orthant of the exact
conjugate statement: rates live in [0, 1], and several conjugates are
unbounded or set-valued outside it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, RateDefinition
from .exceptions import ConfigError, DomainError

KLD_EPS = 1e-8  # added to multipliers in the divergence closed form
DEFAULT_DOMAIN_FLOOR = 1e-3


@dataclass
class MetricSpec:
    """A scalar function of K rates with per-coordinate monotonicity.

    ``value_fn``/``grad_fn`` take a length-K vector.  ``lipschitz`` is a
    constant for the clipped box, used only for default multiplier-radius
    suggestions.  ``analytic_br(scale, lam)`` returns the unclipped minimizer
    of scale*value(xi) + sum lam_k sigma_k xi_k when a closed form exists.
    """

    name: str
    K: int
    senses: tuple
    value_fn: object
    grad_fn: object
    lipschitz: float
    domain_floor: float = DEFAULT_DOMAIN_FLOOR
    convex: bool = True
    analytic_br: object = None

    def value(self, xi) -> float:
        return float(self.value_fn(np.asarray(xi, dtype=float)))

    def sigma(self) -> np.ndarray:
        return np.array([-1.0 if s == "increasing" else 1.0 for s in self.senses])

    def in_domain(self, xi, tol: float = 1e-12) -> bool:
        xi = np.asarray(xi, dtype=float)
        return bool(np.all(xi >= self.domain_floor - tol) and np.all(xi <= 1.0 + tol))


@dataclass
class ConstraintSpec(MetricSpec):
    """A metric used as a constraint: value(xi) <= 0 is feasibility.

    Built by shifting a metric by an upper bound; the shift leaves gradients
    and best responses untouched.
    """

    bound: float = 0.0


def constraint_from_metric(metric: MetricSpec, upper_bound: float,
                           name: str | None = None) -> ConstraintSpec:
    return ConstraintSpec(
        name=name or f"{metric.name}<= {upper_bound}",
        K=metric.K,
        senses=metric.senses,
        value_fn=lambda xi, _m=metric, _b=upper_bound: _m.value_fn(xi) - _b,
        grad_fn=metric.grad_fn,
        lipschitz=metric.lipschitz,
        domain_floor=metric.domain_floor,
        convex=metric.convex,
        analytic_br=metric.analytic_br,
        bound=upper_bound,
    )


# --------------------------------------------------------------------------
# metric constructors


def _edge_search_br(value_fn, edge_minimizer, eps: float):
    """Exact box best response for 2-d metrics whose nonlinear part is
    1-homogeneous: the optimum sits on a box edge, and each edge restriction
    is a 1-d convex problem solved by ``edge_minimizer(c, lin, scale)``.
    """

    def br(scale, lin):
        lin = np.asarray(lin, dtype=float)
        best = None
        for axis in (0, 1):
            for c in (eps, 1.0):
                x = float(np.clip(edge_minimizer(c, lin[axis], scale), eps, 1.0))
                point = np.array([x, c]) if axis == 0 else np.array([c, x])
                val = scale * value_fn(point) + float(lin @ point)
                if best is None or val < best[0] - 1e-15:
                    best = (val, point)
        return best[1]

    return br


def build_metric(kind: str, *, p: float | None = None,
                 domain_floor: float = DEFAULT_DOMAIN_FLOOR) -> MetricSpec:
    """Standard rate metrics by name.

    gmean / hmean are over (TPR, TNR), qmean over (FPR, FNR), kld over
    (coverage, 1 - coverage) for positive proportion p.  fmeasure (over the
    TP/FP/FN proportions) is fractional-linear, flagged non-convex: valid for
    evaluation and ratio compilation, rejected by the convex-game optimizers.
    """
    eps = domain_floor
    if kind == "gmean":
        value = lambda z: 1.0 - np.sqrt(z[0] * z[1])

        def gmean_edge(c, lin, scale):
            # argmin over x of -scale*sqrt(c*x) + lin*x
            return scale ** 2 * c / (4.0 * lin ** 2) if lin > 0 else 1.0

        return MetricSpec(
            name="gmean", K=2, senses=("decreasing", "decreasing"),
            value_fn=value,
            grad_fn=lambda z: np.array([-0.5 * np.sqrt(z[1] / z[0]),
                                        -0.5 * np.sqrt(z[0] / z[1])]),
            lipschitz=0.5 * (np.sqrt(1.0 / eps) + np.sqrt(eps)),
            domain_floor=eps,
            analytic_br=_edge_search_br(value, gmean_edge, eps))
    if kind == "hmean":
        value = lambda z: 1.0 - 2.0 * z[0] * z[1] / (z[0] + z[1])

        def hmean_edge(c, lin, scale):
            return c * (np.sqrt(2.0 * scale / lin) - 1.0) if lin > 0 else 1.0

        return MetricSpec(
            name="hmean", K=2, senses=("decreasing", "decreasing"),
            value_fn=value,
            grad_fn=lambda z: np.array([-2.0 * z[1] ** 2 / (z[0] + z[1]) ** 2,
                                        -2.0 * z[0] ** 2 / (z[0] + z[1]) ** 2]),
            lipschitz=2.0,
            domain_floor=eps,
            analytic_br=_edge_search_br(value, hmean_edge, eps))
    if kind == "qmean":
        # distance of (FPR, FNR) from the perfect corner; increasing senses
        value = lambda z: float(np.hypot(z[0], z[1]))

        def qmean_edge(c, lin, scale):
            a = -lin  # increasing sense: linear coefficient is -lambda <= 0
            if a >= scale:
                return 1.0
            return c * a / np.sqrt(scale ** 2 - a ** 2) if a > 0 else eps

        return MetricSpec(
            name="qmean", K=2, senses=("increasing", "increasing"),
            value_fn=value,
            grad_fn=lambda z: np.asarray(z) / np.hypot(z[0], z[1]),
            lipschitz=np.sqrt(2.0),
            domain_floor=eps,
            analytic_br=_edge_search_br(value, qmean_edge, eps))
    if kind == "kld":
        if p is None:
            raise ConfigError("kld metric needs the positive proportion p")
        if not 0.0 < p < 1.0:
            raise ConfigError(f"kld needs p in (0, 1), got {p}")
        weights = np.array([p, 1.0 - p])

        def kld_value(z, w=weights):
            return float(np.sum(w * np.log(w / np.asarray(z))))

        return MetricSpec(
            name=f"kld(p={p:g})", K=2, senses=("decreasing", "decreasing"),
            value_fn=kld_value,
            grad_fn=lambda z, w=weights: -w / np.asarray(z),
            lipschitz=max(p, 1.0 - p) / eps,
            domain_floor=eps,
            analytic_br=lambda scale, lam, w=weights: scale * w / (np.asarray(lam) + KLD_EPS))
    if kind == "fmeasure":
        # over proportions (TP, FP, FN); pseudo-convex only
        return MetricSpec(
            name="fmeasure-complement", K=3,
            senses=("decreasing", "increasing", "increasing"),
            value_fn=lambda z: (z[1] + z[2]) / (2.0 * z[0] + z[1] + z[2]),
            grad_fn=lambda z: np.array([
                -2.0 * (z[1] + z[2]), 2.0 * z[0], 2.0 * z[0],
            ]) / (2.0 * z[0] + z[1] + z[2]) ** 2,
            lipschitz=2.0 / eps,
            domain_floor=eps,
            convex=False)
    raise ConfigError(f"unknown metric kind {kind!r}")


def concat_metrics(metrics: list[MetricSpec], name: str) -> MetricSpec:
    """Sum of metrics over disjoint consecutive coordinate blocks."""
    sizes = [m.K for m in metrics]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)

    def value(z):
        return sum(m.value_fn(z[offsets[i]:offsets[i + 1]])
                   for i, m in enumerate(metrics))

    def grad(z):
        return np.concatenate([
            np.asarray(m.grad_fn(z[offsets[i]:offsets[i + 1]]), dtype=float)
            for i, m in enumerate(metrics)])

    analytic = None
    if all(m.analytic_br is not None for m in metrics):
        def analytic(scale, lam):
            return np.concatenate([
                np.asarray(m.analytic_br(scale, lam[offsets[i]:offsets[i + 1]]), dtype=float)
                for i, m in enumerate(metrics)])

    return MetricSpec(
        name=name, K=int(sum(sizes)),
        senses=tuple(s for m in metrics for s in m.senses),
        value_fn=value, grad_fn=grad,
        lipschitz=float(sum(m.lipschitz for m in metrics)),
        domain_floor=max(m.domain_floor for m in metrics),
        convex=all(m.convex for m in metrics),
        analytic_br=analytic)


def psi_grad(spec: MetricSpec, xi) -> np.ndarray:
    """Analytic gradient, only defined on the box [domain_floor, 1]^K."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (spec.K,):
        raise DomainError(f"{spec.name}: expected {spec.K} coordinates, got {xi.shape}")
    if not spec.in_domain(xi):
        raise DomainError(
            f"{spec.name}: point {xi} outside the box [{spec.domain_floor}, 1]^{spec.K}")
    return np.asarray(spec.grad_fn(xi), dtype=float)


# --------------------------------------------------------------------------
# slack-player best response


def best_response_xi(terms, lam_rate, *, constrained: bool = False,
                     lam_floor: float = 1e-3, x0: np.ndarray | None = None) -> np.ndarray:
    """Minimize Phi(xi) + sum_k lam_k sigma_k xi_k over the domain box.

    ``terms`` is a single MetricSpec (objective case, weight 1) or a list of
    (weight, spec) pairs sharing the same coordinate layout (weighted
    constraints).  In the constrained case at least one weight must reach
    ``lam_floor``, otherwise the underlying conjugate is unbounded.
    """
    if isinstance(terms, MetricSpec):
        weighted = [(1.0, terms)]
    else:
        weighted = [(float(w), s) for w, s in terms]
    spec0 = weighted[0][1]
    K = spec0.K
    senses = spec0.senses
    floor = max(s.domain_floor for _, s in weighted)
    for _, s in weighted:
        if s.K != K or s.senses != senses:
            raise ConfigError("best response terms must share coordinates and senses")
    lam_rate = np.asarray(lam_rate, dtype=float)
    if lam_rate.shape != (K,):
        raise ConfigError(f"expected {K} rate multipliers, got {lam_rate.shape}")
    if np.any(lam_rate < 0):
        raise ConfigError("rate multipliers must be nonnegative")
    if constrained and max(w for w, _ in weighted) < lam_floor:
        if np.any(lam_rate > 0):
            # with no live constraint weight the exact conjugate is unbounded
            raise ConfigError(
                "unbounded best response: every constraint multiplier is "
                f"below the floor {lam_floor} while rate multipliers are live")
        return np.full(K, 0.5 * (floor + 1.0))
    sigma = spec0.sigma()
    linear = lam_rate * sigma

    if len(weighted) == 1 and weighted[0][1].analytic_br is not None:
        w, spec = weighted[0]
        # closed forms exist only for decreasing-sense metrics (sigma = +1)
        with np.errstate(divide="ignore", over="ignore"):
            xi = np.asarray(spec.analytic_br(w, linear), dtype=float)
        return np.clip(np.nan_to_num(xi, nan=1.0, posinf=1.0), floor, 1.0)

    def f(xi):
        return sum(w * s.value_fn(xi) for w, s in weighted) + float(linear @ xi)

    def grad(xi):
        g = linear.copy()
        for w, s in weighted:
            g = g + w * np.asarray(s.grad_fn(xi), dtype=float)
        return g

    return _projected_gradient_box(f, grad, K, floor, 1.0, x0=x0)


def _projected_gradient_box(f, grad, K, lo, hi, max_steps: int = 500,
                            tol: float = 1e-8, x0=None) -> np.ndarray:
    """Armijo-backtracked projected gradient on a convex box problem.

    ``x0`` warm-starts the solve (the best response drifts slowly along a
    multiplier trajectory, so warm starts usually finish in a few steps).
    """
    if x0 is not None:
        xi = np.clip(np.asarray(x0, dtype=float), lo, hi)
    else:
        xi = np.full(K, 0.5 * (lo + hi))
    fx = f(xi)
    for _ in range(max_steps):
        g = grad(xi)
        if np.max(np.abs(xi - np.clip(xi - g, lo, hi))) <= tol:
            break
        step = 1.0
        while step > 1e-16:
            cand = np.clip(xi - step * g, lo, hi)
            fc = f(cand)
            if fc <= fx + 1e-4 * float(g @ (cand - xi)):
                break
            step *= 0.5
        xi, fx = cand, fc
    return xi


# --------------------------------------------------------------------------
# linear and sum-of-ratios constraints over rates


@dataclass
class LinearRateConstraint:
    """w . R(theta) - bound <= 0 over the problem's rate coordinates."""

    weights: np.ndarray
    bound: float
    name: str = "linear"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)

    def violation(self, rates: np.ndarray) -> float:
        return float(self.weights @ rates - self.bound)


@dataclass(frozen=True)
class RatioTerm:
    """One signed fractional-linear term alpha.R / beta.R."""

    alpha: tuple
    beta: tuple
    sign: int = 1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ConfigError("ratio term sign must be -1 or +1")
        if any(a < 0 for a in self.alpha) or any(b < 0 for b in self.beta):
            raise ConfigError("ratio coefficients must be nonnegative")


@dataclass
class SumOfRatiosSpec:
    """sum_m sign_m * (alpha_m . R) / (beta_m . R) <= gamma.

    ``lower``/``upper`` bound every numerator and denominator encountered;
    values outside are clipped with a warning rather than rejected, since the
    bounds are an assumption on the model space, not a hard invariant.
    """

    terms: list[RatioTerm]
    gamma: float
    lower: float
    upper: float
    rdefs: list[RateDefinition]
    name: str = "sum-of-ratios"
    transform: str = ""

    def __post_init__(self):
        if not (0.0 < self.lower <= self.upper):
            raise ConfigError("need 0 < lower <= upper ratio bounds")
        K = len(self.rdefs)
        for t in self.terms:
            if len(t.alpha) != K or len(t.beta) != K:
                raise ConfigError("ratio term dimension mismatch with rate defs")

    @property
    def M(self) -> int:
        return len(self.terms)

    def numerators(self, rates: np.ndarray) -> np.ndarray:
        return np.array([np.dot(t.alpha, rates) for t in self.terms])

    def denominators(self, rates: np.ndarray) -> np.ndarray:
        return np.array([np.dot(t.beta, rates) for t in self.terms])

    def signs(self) -> np.ndarray:
        return np.array([t.sign for t in self.terms], dtype=float)

    def clipped_parts(self, rates: np.ndarray, warn: bool = False) -> tuple[np.ndarray, np.ndarray]:
        num = self.numerators(rates)
        den = self.denominators(rates)
        if warn and (np.any(num < self.lower) or np.any(den > self.upper)
                     or np.any(den < self.lower) or np.any(num > self.upper)):
            warnings.warn(
                f"{self.name}: ratio parts left [{self.lower}, {self.upper}]; clipping",
                RuntimeWarning, stacklevel=2)
        return (np.clip(num, self.lower, self.upper),
                np.clip(den, self.lower, self.upper))

    def value(self, rates: np.ndarray) -> float:
        num = self.numerators(rates)
        den = self.denominators(rates)
        return float(np.sum(self.signs() * num / den))

    def violation(self, rates: np.ndarray) -> float:
        return self.value(rates) - self.gamma


# --------------------------------------------------------------------------
# parity-constraint compiler


def _group_f_parts(p_g: float, offset: int, K: int):
    """(alpha, beta) coefficient rows for F and 1-F of one group.

    Rate layout per group: (TPR, FPR, FNR).  Proportions within the group:
    TP = p*TPR, FP = (1-p)*FPR, FN = p*FNR, so 2TP + FP + FN is nonnegative
    linear in the three rates.
    """
    f_num = np.zeros(K)
    f_num[offset] = 2.0 * p_g
    comp_num = np.zeros(K)
    comp_num[offset + 1] = 1.0 - p_g
    comp_num[offset + 2] = p_g
    den = f_num + comp_num
    return f_num, comp_num, den


def _group_rate_defs(group: int) -> list[RateDefinition]:
    return [
        RateDefinition(target="predict-positive", group=group, label=1,
                       sense="increasing", name=f"tpr_g{group}"),
        RateDefinition(target="predict-positive", group=group, label=-1,
                       sense="increasing", name=f"fpr_g{group}"),
        RateDefinition(target="predict-negative", group=group, label=1,
                       sense="increasing", name=f"fnr_g{group}"),
    ]


def compile_parity_constraint(kind: str, group_a: int, group_b: int, delta: float,
                              train: Dataset, *, lower: float = 0.01,
                              upper: float = 2.0) -> SumOfRatiosSpec:
    """Compile a two-group metric-parity constraint into signed ratio terms.

    fmeasure-parity / predictive-parity bound metric(group_b) below
    metric(group_a) + delta, rewritten with nonnegative terms via the
    complement identity: (1 - m_A) + m_B <= 1 + delta.  churn-difference
    keeps signed terms: churn(group_a) - churn(group_b) <= delta, and needs
    reference predictions on the dataset.
    """
    if group_a == group_b:
        raise ConfigError("parity constraint needs two distinct groups")
    if delta < 0:
        raise ConfigError("parity slack must be nonnegative")

    if kind == "fmeasure-parity":
        p_a = _group_positive_rate(train, group_a)
        p_b = _group_positive_rate(train, group_b)
        rdefs = _group_rate_defs(group_a) + _group_rate_defs(group_b)
        K = len(rdefs)
        _, comp_a, den_a = _group_f_parts(p_a, 0, K)
        f_b, _, den_b = _group_f_parts(p_b, 3, K)
        terms = [RatioTerm(tuple(comp_a), tuple(den_a), 1),
                 RatioTerm(tuple(f_b), tuple(den_b), 1)]
        return SumOfRatiosSpec(terms, 1.0 + delta, lower, upper, rdefs,
                               name=f"fmeasure-parity(g{group_a},g{group_b})",
                               transform="complement: (1-F_a) + F_b <= 1 + delta")

    if kind == "predictive-parity":
        p_a = _group_positive_rate(train, group_a)
        p_b = _group_positive_rate(train, group_b)
        rdefs = _group_rate_defs(group_a)[:2] + _group_rate_defs(group_b)[:2]
        K = len(rdefs)
        # precision = TP / (TP + FP); complement = FP / (TP + FP)
        comp_a = np.array([0.0, 1.0 - p_a, 0.0, 0.0])
        den_a = np.array([p_a, 1.0 - p_a, 0.0, 0.0])
        prec_b = np.array([0.0, 0.0, p_b, 0.0])
        den_b = np.array([0.0, 0.0, p_b, 1.0 - p_b])
        terms = [RatioTerm(tuple(comp_a), tuple(den_a), 1),
                 RatioTerm(tuple(prec_b), tuple(den_b), 1)]
        return SumOfRatiosSpec(terms, 1.0 + delta, lower, upper, rdefs,
                               name=f"predictive-parity(g{group_a},g{group_b})",
                               transform="complement: (1-prec_a) + prec_b <= 1 + delta")

    if kind == "churn-difference":
        if train.ref_predictions is None:
            raise ConfigError("churn-difference needs reference predictions on the dataset")
        rdefs: list[RateDefinition] = []
        rows = []
        for group in (group_a, group_b):
            rows.append(_churn_parts(train, group, rdefs))
        K = len(rdefs)
        terms = []
        for (win_pairs, loss_pairs), sign in zip(rows, (1, -1)):
            alpha = np.zeros(K)
            beta = np.zeros(K)
            for idx, coef in win_pairs:
                alpha[idx] = coef
            for idx, coef in loss_pairs:
                beta[idx] = coef
            terms.append(RatioTerm(tuple(alpha), tuple(beta), sign))
        return SumOfRatiosSpec(terms, delta, lower, upper, rdefs,
                               name=f"churn-difference(g{group_a},g{group_b})",
                               transform="signed: churn_a - churn_b <= delta")

    raise ConfigError(f"unknown parity constraint kind {kind!r}")


def _group_positive_rate(ds: Dataset, group: int) -> float:
    mask = ds.groups == group
    if not mask.any():
        raise ConfigError(f"group {group} absent from dataset {ds.name!r}")
    return float(np.mean(ds.labels[mask] == 1))


def _churn_parts(ds: Dataset, group: int, rdefs: list[RateDefinition]):
    """Win/loss proportions of one group as nonnegative rate combinations.

    wins  = P(new = y, y != old | g)   -> agree-rates on y != old cells
    losses = P(new != y, y = old | g)  -> disagree-rates on y = old cells,
    with disagreement expressed through the complementary predict target.
    """
    gmask = ds.groups == group
    n_g = gmask.sum()
    win_pairs = []
    loss_pairs = []
    for label in (1, -1):
        predict_label = "predict-positive" if label == 1 else "predict-negative"
        predict_other = "predict-negative" if label == 1 else "predict-positive"
        win_cell = gmask & (ds.labels == label) & (ds.ref_predictions == -label)
        if win_cell.any():
            rdefs.append(RateDefinition(
                target=predict_label, group=group, label=label, ref=-label,
                sense="increasing", name=f"win_g{group}_y{label:+d}"))
            win_pairs.append((len(rdefs) - 1, win_cell.sum() / n_g))
        loss_cell = gmask & (ds.labels == label) & (ds.ref_predictions == label)
        if loss_cell.any():
            rdefs.append(RateDefinition(
                target=predict_other, group=group, label=label, ref=label,
                sense="increasing", name=f"loss_g{group}_y{label:+d}"))
            loss_pairs.append((len(rdefs) - 1, loss_cell.sum() / n_g))
    return win_pairs, loss_pairs
