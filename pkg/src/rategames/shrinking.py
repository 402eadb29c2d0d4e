"""Turning a training trace into a final classifier.

The sparse stochastic classifier comes from a small dense LP over the
snapshot simplex: minimize the mixture objective subject to nonpositive
mixture constraint values.  A vertex solution has at most J+1 nonzero
weights (J = number of constraint rows), and for convex constraint functions
the mixture inherits feasibility from the per-snapshot values by Jensen.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, RateEvaluator, StochasticModel
from .exceptions import ConfigError

_TOL = 1e-9


@dataclass
class ShrinkProblem:
    """Objective row c (per snapshot) and violation rows A (J x T)."""

    c: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[1] != self.c.size:
            raise ConfigError("shrink problem dimensions are inconsistent")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A))):
            raise ConfigError("shrink problem entries must be finite")
        if self.c.size < 1:
            raise ConfigError("shrink problem needs at least one snapshot")


@dataclass
class ShrinkResult:
    status: str  # "optimal" | "infeasible"
    mu: np.ndarray | None = None
    objective: float | None = None

    @property
    def support_size(self) -> int:
        return 0 if self.mu is None else int(np.sum(self.mu > _TOL))


def solve_lp_simplex(c, A) -> ShrinkResult:
    """min c.mu  s.t.  A mu <= 0,  sum(mu) = 1,  mu >= 0.

    Two-phase dense simplex with Bland's anti-cycling rule; the vertex basis
    has one variable per row, which caps the mu-support at J+1.
    """
    problem = ShrinkProblem(c, A)
    c = problem.c
    A = problem.A
    J, T = A.shape

    # standard form over x = [mu (T), s (J), artificial (1)]
    n_var = T + J
    rows = J + 1
    tableau = np.zeros((rows, n_var + 2))  # +artificial +rhs
    tableau[:J, :T] = A
    tableau[:J, T:T + J] = np.eye(J)
    tableau[J, :T] = 1.0
    tableau[J, n_var] = 1.0  # artificial in the equality row
    tableau[J, n_var + 1] = 1.0  # rhs
    basis = list(range(T, T + J)) + [n_var]

    # phase 1: drive the artificial variable out
    cost1 = np.zeros(n_var + 1)
    cost1[n_var] = 1.0
    status = _simplex(tableau, basis, cost1)
    if status != "optimal" or _objective(tableau, basis, cost1) > 1e-7:
        return ShrinkResult(status="infeasible")
    _pivot_out_artificial(tableau, basis, n_var)

    # phase 2 on the original costs, artificial column frozen
    cost2 = np.zeros(n_var + 1)
    cost2[:T] = c
    cost2[n_var] = np.inf  # never re-enter
    status = _simplex(tableau, basis, cost2)
    if status != "optimal":  # unbounded cannot happen on the simplex; defensive
        return ShrinkResult(status="infeasible")
    x = np.zeros(n_var + 1)
    for i, j in enumerate(basis):
        x[j] = tableau[i, -1]
    mu = np.maximum(x[:T], 0.0)
    mu /= mu.sum()
    return ShrinkResult(status="optimal", mu=mu, objective=float(c @ mu))


def _objective(tableau, basis, cost):
    return float(sum(cost[j] * tableau[i, -1] for i, j in enumerate(basis)
                     if np.isfinite(cost[j])))


def _simplex(tableau, basis, cost, max_iters: int = 100000) -> str:
    rows = tableau.shape[0]
    n_total = tableau.shape[1] - 1
    for _ in range(max_iters):
        # reduced costs: c_j - c_B . B^-1 A_j  (tableau rows are B^-1 A)
        cb = np.array([cost[j] if np.isfinite(cost[j]) else 0.0 for j in basis])
        reduced = np.where(np.isfinite(cost), cost, np.inf).copy()
        reduced[:n_total] -= cb @ tableau[:, :n_total]
        entering = -1
        for j in range(n_total):  # Bland: smallest eligible index
            if j in basis or not np.isfinite(cost[j]):
                continue
            if reduced[j] < -_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        col = tableau[:, entering]
        best_ratio = np.inf
        leaving = -1
        for i in range(rows):
            if col[i] > _TOL:
                ratio = tableau[i, -1] / col[i]
                if (ratio < best_ratio - _TOL
                        or (abs(ratio - best_ratio) <= _TOL
                            and (leaving < 0 or basis[i] < basis[leaving]))):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            return "unbounded"
        _pivot(tableau, leaving, entering)
        basis[leaving] = entering
    raise ConfigError("simplex iteration cap exceeded")


def _pivot(tableau, row, col):
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and abs(tableau[i, col]) > 0:
            tableau[i] -= tableau[i, col] * tableau[row]


def _pivot_out_artificial(tableau, basis, art_index):
    if art_index not in basis:
        return
    row = basis.index(art_index)
    for j in range(art_index):
        if abs(tableau[row, j]) > _TOL:
            _pivot(tableau, row, j)
            basis[row] = j
            return
    # redundant row: artificial stays basic at zero, harmless


# --------------------------------------------------------------------------
# trace post-processing


def snapshot_table(problem_spec, trace, eval_ds: Dataset):
    """Per-snapshot objective and constraint values recomputed on eval_ds."""
    compiled = problem_spec.compile()
    evaluator = RateEvaluator(compiled.rate_defs, eval_ds)
    objectives = []
    violations = []
    for snap in trace.snapshots:
        rates = evaluator.rates(snap.model)
        objectives.append(compiled.objective_value(rates))
        violations.append(compiled.violations(rates))
    return np.array(objectives), np.array(violations).T.reshape(-1, len(trace.snapshots))


def shrink(trace, problem_spec, eval_ds: Dataset) -> tuple[StochasticModel, ShrinkResult]:
    """Sparse feasible mixture over trace snapshots via the simplex LP.

    Falls back to a uniform mixture over the least-max-violation snapshots
    (with a warning) when no feasible mixture exists.
    """
    if len(trace) == 0:
        raise ConfigError("cannot shrink an empty trace")
    c, A = snapshot_table(problem_spec, trace, eval_ds)
    result = solve_lp_simplex(c, A)
    models = trace.models()
    if result.status == "optimal":
        atoms = [(models[t], float(w)) for t, w in enumerate(result.mu) if w > _TOL]
        total = sum(w for _, w in atoms)
        atoms = [(m, w / total) for m, w in atoms]
        return StochasticModel(atoms), result
    warnings.warn("shrinking LP infeasible; falling back to the least-violation "
                  "snapshots", RuntimeWarning, stacklevel=2)
    max_viol = A.max(axis=0) if A.size else np.zeros(len(models))
    best = max_viol.min()
    chosen = [t for t, v in enumerate(max_viol) if v <= best + _TOL]
    atoms = [(models[t], 1.0 / len(chosen)) for t in chosen]
    return StochasticModel(atoms), result


def best_iterate(trace, problem_spec, val_ds: Dataset, tolerance: float = 0.02):
    """Single snapshot choice: feasible-within-tolerance with least objective,
    falling back to the least max-violation snapshot."""
    if len(trace) == 0:
        raise ConfigError("cannot pick an iterate from an empty trace")
    c, A = snapshot_table(problem_spec, trace, val_ds)
    max_viol = A.max(axis=0) if A.size else np.zeros(c.size)
    qualified = np.nonzero(max_viol <= tolerance)[0]
    if qualified.size:
        pick = qualified[int(np.argmin(c[qualified]))]
    else:
        pick = int(np.argmin(max_viol))
    return trace.snapshots[pick].model


def uniform_mixture(trace) -> StochasticModel:
    """Equal weight on every snapshot."""
    if len(trace) == 0:
        raise ConfigError("cannot mix an empty trace")
    T = len(trace)
    return StochasticModel([(s.model, 1.0 / T) for s in trace.snapshots])
