"""Training algorithms: oracle/surrogate games for convex rate problems and
two heuristic optimizers for sum-of-ratios constraints.

All runners are snapshotting loops over three (or four) players:

  * the model player minimizes a cost-weighted sum of rates, either through a
    cost-sensitive oracle (best response) or by online gradient descent on
    hinge surrogates;
  * the slack player best-responds through the conjugate of the convex
    metric/constraint functions (or closed forms for the ratio slacks);
  * the multiplier player ascends the true Lagrangian, projected onto a
    nonnegative l1 ball, optionally floored on constraint coordinates.

Only the model player ever sees surrogates; multipliers always consume true
rates (the one exception being the surrogate-everywhere variant, which is the
point of that algorithm).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import (Dataset, GroupwiseModel, LinearModel, RateDefinition,
                   RateEvaluator)
from .exceptions import ConfigError, OptimizationError
from .metrics import (ConstraintSpec, LinearRateConstraint, MetricSpec,
                      SumOfRatiosSpec, best_response_xi)
from .projections import (project_box, project_floored_l1_ball,
                          project_l2_ball, project_nonneg_l1_ball)
from .surrogates import SurrogateEvaluator

logger = logging.getLogger(__name__)

TRACE_SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# configuration


@dataclass
class OgdConfig:
    """Iteration counts, step sizes, and feasible-set radii for one run.

    ``eta_*`` left as None are filled from a 50-step warmup estimate of the
    gradient bounds (eta_lambda = kappa / (B_lam sqrt(2T)), eta_theta =
    norm_bound / (B_theta sqrt(T))).  ``kappa`` left as None defaults to the
    objective metric's Lipschitz constant in the unconstrained case and must
    be given explicitly otherwise (see :func:`kappa_preset`).
    ``batch_size`` 0 means full batch.
    """

    T: int
    eta_theta: float | None = None
    eta_lambda: float | None = None
    eta_aux: float | None = None
    kappa: float | None = None
    lam_floor: float = 1e-3
    batch_size: int = 0
    snapshot_every: int = 10
    seed: int = 0
    norm_bound: float = 10.0
    grad_clip: float = 1e6
    u_max: float | None = None

    def __post_init__(self):
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if self.snapshot_every <= 0 or self.snapshot_every > self.T:
            raise ConfigError("snapshot_every must be in [1, T]")
        for name in ("eta_theta", "eta_lambda", "eta_aux"):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.kappa is not None and self.kappa < 0:
            raise ConfigError("kappa must be nonnegative")
        if self.lam_floor < 0:
            raise ConfigError("lam_floor must be nonnegative")
        if self.norm_bound <= 0:
            raise ConfigError("norm_bound must be positive")


def kappa_preset(lipschitz: float, T: int, omega: float = 0.25) -> float:
    """Radius preset (L + 1) * T^omega for constrained surrogate runs."""
    if not 0.0 < omega < 0.5:
        raise ConfigError("omega must lie in (0, 0.5)")
    return (lipschitz + 1.0) * T ** omega


# --------------------------------------------------------------------------
# problem specification


@dataclass
class ProblemSpec:
    """What to optimize: objective parts plus rate constraints.

    Each part owns its rate definitions; identical definitions are shared a
    single global coordinate at compile time.  Convex metrics/constraints are
    decoupled through slack coordinates; linear constraints act directly on
    the rates; sum-of-ratios parts are handled by the two heuristic runners.
    """

    objective_metric: tuple[MetricSpec, list[RateDefinition]] | None = None
    error_rate_objective: bool = False
    convex_constraints: list[tuple[ConstraintSpec, list[RateDefinition]]] = field(default_factory=list)
    linear_constraints: list[tuple[LinearRateConstraint, list[RateDefinition]]] = field(default_factory=list)
    ratio_objective: SumOfRatiosSpec | None = None
    ratio_constraints: list[SumOfRatiosSpec] = field(default_factory=list)

    def __post_init__(self):
        if (self.objective_metric is None and not self.error_rate_objective
                and self.ratio_objective is None):
            raise ConfigError("problem needs an objective")
        has_ratio = self.ratio_objective is not None or self.ratio_constraints
        has_convex = self.objective_metric is not None or self.convex_constraints
        if has_ratio and has_convex:
            raise ConfigError("ratio parts cannot be mixed with convex metric parts")
        if self.objective_metric is not None:
            metric, rdefs = self.objective_metric
            if len(rdefs) != metric.K:
                raise ConfigError(f"objective metric {metric.name} expects {metric.K} rates")
        for spec, rdefs in self.convex_constraints:
            if len(rdefs) != spec.K:
                raise ConfigError(f"constraint {spec.name} expects {spec.K} rates")
        for lin, rdefs in self.linear_constraints:
            if len(lin.weights) != len(rdefs):
                raise ConfigError(f"linear constraint {lin.name} dimension mismatch")

    @property
    def mode(self) -> str:
        if self.ratio_objective is not None or self.ratio_constraints:
            return "P3"
        if self.convex_constraints or self.linear_constraints:
            return "P2"
        return "P1"

    def require_convex(self, algorithm: str):
        parts = []
        if self.objective_metric is not None:
            parts.append(self.objective_metric[0])
        parts.extend(spec for spec, _ in self.convex_constraints)
        for spec in parts:
            if not spec.convex:
                raise ConfigError(
                    f"{spec.name} is not convex in the rates and cannot be used "
                    f"with {algorithm}; compile it into ratio form instead")

    def compile(self) -> "CompiledProblem":
        return CompiledProblem(self)


ACCURACY_RATE = RateDefinition(target="agree", sense="increasing", name="accuracy")


class CompiledProblem:
    """Global rate coordinates, multiplier layout, and Lagrangian pieces."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.rate_defs: list[RateDefinition] = []
        self._index: dict[RateDefinition, int] = {}

        def intern(rdef: RateDefinition) -> int:
            if rdef not in self._index:
                self._index[rdef] = len(self.rate_defs)
                self.rate_defs.append(rdef)
            return self._index[rdef]

        self.acc_idx = intern(ACCURACY_RATE) if spec.error_rate_objective else None

        self.obj_idx = None
        if spec.objective_metric is not None:
            metric, rdefs = spec.objective_metric
            self.obj_idx = np.array([intern(r) for r in rdefs])
        self.cvx_idx = [np.array([intern(r) for r in rdefs])
                        for _, rdefs in spec.convex_constraints]

        self.lin_weights = []
        self.lin_bounds = []
        for lin, rdefs in spec.linear_constraints:
            idx = np.array([intern(r) for r in rdefs])
            self.lin_weights.append((idx, np.asarray(lin.weights, dtype=float)))
            self.lin_bounds.append(lin.bound)

        self.ratio_specs: list[SumOfRatiosSpec] = []
        self.ratio_idx: list[np.ndarray] = []
        self.ratio_is_objective: list[bool] = []
        for sors, is_obj in ([(spec.ratio_objective, True)] if spec.ratio_objective else []) \
                + [(s, False) for s in spec.ratio_constraints]:
            self.ratio_specs.append(sors)
            self.ratio_idx.append(np.array([intern(r) for r in sors.rdefs]))
            self.ratio_is_objective.append(is_obj)

        self.K = len(self.rate_defs)
        # full-width linear constraint weight vectors
        self.lin_w_global = []
        for (idx, w_local), _b in zip(self.lin_weights, self.lin_bounds):
            w = np.zeros(self.K)
            w[idx] = w_local
            self.lin_w_global.append(w)

        # decoupled coordinates: every rate consumed by a convex part
        dec = set()
        if self.obj_idx is not None:
            dec.update(self.obj_idx.tolist())
        for idx in self.cvx_idx:
            dec.update(idx.tolist())
        self.dec_idx = np.array(sorted(dec), dtype=int)
        self.dec_pos = {int(k): r for r, k in enumerate(self.dec_idx)}
        self.dec_signs = np.array([self.rate_defs[k].sign for k in self.dec_idx], dtype=float)

        # ratio term coefficient matrices over global coordinates
        self.ratio_alpha = []
        self.ratio_beta = []
        for sors, idx in zip(self.ratio_specs, self.ratio_idx):
            A = np.zeros((sors.M, self.K))
            B = np.zeros((sors.M, self.K))
            for m, term in enumerate(sors.terms):
                A[m, idx] = term.alpha
                B[m, idx] = term.beta
            self.ratio_alpha.append(A)
            self.ratio_beta.append(B)

        self.J_cvx = len(self.cvx_idx)
        self.J_lin = len(self.lin_w_global)
        self.K_dec = len(self.dec_idx)
        self.lam_dim = self.J_cvx + self.J_lin + self.K_dec

    # -- multiplier layout -------------------------------------------------

    def lam_parts(self, lam: np.ndarray):
        j1 = self.J_cvx
        j2 = j1 + self.J_lin
        return lam[:j1], lam[j1:j2], lam[j2:]

    def lam_floor_vector(self, lam_floor: float) -> np.ndarray:
        floor = np.zeros(self.lam_dim)
        floor[:self.J_cvx] = lam_floor
        return floor

    # -- Lagrangian pieces (convex modes) -----------------------------------

    def best_response(self, lam: np.ndarray, lam_floor: float,
                      warm: dict | None = None) -> np.ndarray:
        """Slack best response; coordinates follow dec_idx order.

        The objective block and the weighted-constraint block are solved
        separately when they touch disjoint rates (the common case, keeping
        closed forms usable), jointly otherwise.  ``warm`` carries previous
        block solutions across iterations for the numeric path.
        """
        lam_cvx, _, lam_rate = self.lam_parts(lam)
        xi = np.zeros(self.K_dec)
        obj_pos = (None if self.obj_idx is None
                   else np.array([self.dec_pos[int(k)] for k in self.obj_idx]))
        cvx_pos = [np.array([self.dec_pos[int(k)] for k in idx]) for idx in self.cvx_idx]
        warm = warm if warm is not None else {}

        overlap = False
        if obj_pos is not None and cvx_pos:
            objset = set(obj_pos.tolist())
            overlap = any(objset & set(p.tolist()) for p in cvx_pos)

        if overlap:
            senses = tuple(self.rate_defs[k].sense for k in self.dec_idx)
            terms = [(1.0, _embed_spec(self.spec.objective_metric[0], obj_pos,
                                       self.K_dec, senses))]
            terms += [(lam_cvx[j], _embed_spec(spec, cvx_pos[j], self.K_dec, senses))
                      for j, (spec, _) in enumerate(self.spec.convex_constraints)]
            xi = best_response_xi(terms, lam_rate, x0=warm.get("joint"))
            warm["joint"] = xi
            return xi

        if obj_pos is not None:
            metric = self.spec.objective_metric[0]
            block = best_response_xi(metric, lam_rate[obj_pos], x0=warm.get("obj"))
            warm["obj"] = block
            xi[obj_pos] = block
        if cvx_pos:
            union = sorted({int(p) for pos in cvx_pos for p in pos})
            upos = np.array(union, dtype=int)
            remap = {p: i for i, p in enumerate(union)}
            senses = tuple(self.rate_defs[self.dec_idx[p]].sense for p in union)
            terms = []
            for j, (spec, _) in enumerate(self.spec.convex_constraints):
                local = np.array([remap[int(p)] for p in cvx_pos[j]])
                terms.append((lam_cvx[j], _embed_spec(spec, local, len(union), senses)))
            block = best_response_xi(terms, lam_rate[upos], constrained=True,
                                     lam_floor=max(lam_floor, 1e-12),
                                     x0=warm.get("cvx"))
            warm["cvx"] = block
            xi[upos] = block
        return xi

    def cost_coeffs(self, lam: np.ndarray) -> np.ndarray:
        """Coefficients of L2 as a weighted sum of rates (plus constants)."""
        _, lam_lin, lam_rate = self.lam_parts(lam)
        C = np.zeros(self.K)
        if self.acc_idx is not None:
            C[self.acc_idx] -= 1.0
        if self.K_dec:
            np.add.at(C, self.dec_idx, lam_rate * self.dec_signs)
        for i, w in enumerate(self.lin_w_global):
            C += lam_lin[i] * w
        return C

    def lam_gradient(self, rates: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Ascent direction for the multipliers from (possibly nan) rates."""
        g = np.zeros(self.lam_dim)
        for j, idx in enumerate(self.cvx_idx):
            pos = np.array([self.dec_pos[int(k)] for k in idx])
            spec = self.spec.convex_constraints[j][0]
            g[j] = spec.value(np.clip(xi[pos], spec.domain_floor, 1.0))
        off = self.J_cvx
        for i, w in enumerate(self.lin_w_global):
            needed = rates[w != 0]
            g[off + i] = 0.0 if np.any(np.isnan(needed)) else float(w @ rates) - self.lin_bounds[i]
        off += self.J_lin
        diff = rates[self.dec_idx] - xi
        diff = np.where(np.isnan(diff), 0.0, diff)
        g[off:] = self.dec_signs * diff
        return g

    # -- evaluation on arbitrary rate vectors --------------------------------

    def objective_value(self, rates: np.ndarray) -> float:
        total = 0.0
        if self.acc_idx is not None:
            total += 1.0 - rates[self.acc_idx]
        if self.obj_idx is not None:
            metric = self.spec.objective_metric[0]
            z = np.clip(rates[self.obj_idx], metric.domain_floor, 1.0)
            total += metric.value(z)
        for sors, idx, is_obj in zip(self.ratio_specs, self.ratio_idx, self.ratio_is_objective):
            if is_obj:
                num, den = sors.clipped_parts(rates[idx])
                total += float(np.sum(sors.signs() * num / den))
        return float(total)

    def violations(self, rates: np.ndarray) -> np.ndarray:
        out = []
        for j, idx in enumerate(self.cvx_idx):
            spec = self.spec.convex_constraints[j][0]
            z = np.clip(rates[idx], spec.domain_floor, 1.0)
            out.append(spec.value(z))
        for i, w in enumerate(self.lin_w_global):
            out.append(float(w @ rates) - self.lin_bounds[i])
        for sors, idx, is_obj in zip(self.ratio_specs, self.ratio_idx, self.ratio_is_objective):
            if not is_obj:
                num, den = sors.clipped_parts(rates[idx])
                out.append(float(np.sum(sors.signs() * num / den)) - sors.gamma)
        return np.array(out) if out else np.zeros(0)

    def constraint_names(self) -> list[str]:
        names = [spec.name for spec, _ in self.spec.convex_constraints]
        names += [lin.name for lin, _ in self.spec.linear_constraints]
        names += [s.name for s, o in zip(self.ratio_specs, self.ratio_is_objective) if not o]
        return names

    def rates_of(self, model, ds: Dataset) -> np.ndarray:
        return RateEvaluator(self.rate_defs, ds).rates(model)

    def metric_lipschitz_max(self) -> float:
        vals = []
        if self.spec.objective_metric is not None:
            vals.append(self.spec.objective_metric[0].lipschitz)
        vals.extend(spec.lipschitz for spec, _ in self.spec.convex_constraints)
        return max(vals) if vals else 1.0


def _embed_spec(spec: MetricSpec, pos: np.ndarray, width: int, senses: tuple) -> MetricSpec:
    """View a metric over a wider coordinate block (identity passes through)."""
    pos = np.asarray(pos, dtype=int)
    if width == spec.K and np.array_equal(pos, np.arange(spec.K)):
        return spec

    def value(z, _s=spec, _p=pos):
        return _s.value_fn(np.asarray(z)[_p])

    def grad(z, _s=spec, _p=pos, _w=width):
        g = np.zeros(_w)
        g[_p] = np.asarray(_s.grad_fn(np.asarray(z)[_p]), dtype=float)
        return g

    return MetricSpec(name=f"{spec.name}[embedded]", K=width, senses=senses,
                      value_fn=value, grad_fn=grad,
                      lipschitz=spec.lipschitz, domain_floor=spec.domain_floor,
                      convex=spec.convex, analytic_br=None)


# --------------------------------------------------------------------------
# trace


@dataclass
class TraceSnapshot:
    iteration: int
    model: object
    lam: np.ndarray
    aux: dict
    rates: np.ndarray
    objective: float
    violations: np.ndarray


@dataclass
class Trace:
    snapshots: list[TraceSnapshot]
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.snapshots)

    def models(self) -> list:
        return [s.model for s in self.snapshots]

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            header = {"schema_version": TRACE_SCHEMA_VERSION, "kind": "trace",
                      "metadata": _jsonable(self.metadata)}
            fh.write(json.dumps(header) + "\n")
            for snap in self.snapshots:
                fh.write(json.dumps({
                    "iteration": snap.iteration,
                    "model": _model_to_json(snap.model),
                    "lambda": snap.lam.tolist(),
                    "aux": {k: np.asarray(v).tolist() for k, v in snap.aux.items()},
                    "rates": snap.rates.tolist(),
                    "objective": snap.objective,
                    "violations": snap.violations.tolist(),
                }) + "\n")

    @classmethod
    def load(cls, path) -> "Trace":
        path = Path(path)
        with path.open() as fh:
            header = json.loads(fh.readline())
            if header.get("schema_version") != TRACE_SCHEMA_VERSION:
                raise ConfigError(f"unsupported trace schema in {path}")
            snaps = []
            for line in fh:
                rec = json.loads(line)
                snaps.append(TraceSnapshot(
                    iteration=rec["iteration"],
                    model=_model_from_json(rec["model"]),
                    lam=np.array(rec["lambda"]),
                    aux={k: np.array(v) for k, v in rec["aux"].items()},
                    rates=np.array(rec["rates"]),
                    objective=rec["objective"],
                    violations=np.array(rec["violations"]),
                ))
        return cls(snaps, metadata=header.get("metadata", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _model_to_json(model):
    if isinstance(model, LinearModel):
        return {"type": "linear", "params": model.param_vector().tolist(),
                "norm_bound": None if np.isinf(model.norm_bound) else model.norm_bound}
    if isinstance(model, GroupwiseModel):
        return {"type": "groupwise", "base": model.base.param_vector().tolist(),
                "shifts": {str(k): v for k, v in model.shifts.items()},
                "scales": {str(k): v for k, v in model.scales.items()}}
    raise ConfigError(f"cannot serialize model of type {type(model).__name__}")


def _model_from_json(rec):
    if rec["type"] == "linear":
        bound = rec.get("norm_bound")
        return LinearModel.from_param_vector(
            np.array(rec["params"]), np.inf if bound is None else bound)
    if rec["type"] == "groupwise":
        return GroupwiseModel(
            base=LinearModel.from_param_vector(np.array(rec["base"])),
            shifts={int(k): v for k, v in rec["shifts"].items()},
            scales={int(k): v for k, v in rec["scales"].items()})
    raise ConfigError(f"unknown serialized model type {rec['type']!r}")


# --------------------------------------------------------------------------
# shared runner plumbing


class _Batcher:
    """Full-batch or sampled-with-replacement minibatch rate/surrogate source."""

    def __init__(self, compiled: CompiledProblem, train: Dataset, cfg: OgdConfig):
        self.compiled = compiled
        self.train = train
        self.batch_size = cfg.batch_size
        self.rng = np.random.default_rng(cfg.seed)
        self.full_rates = RateEvaluator(compiled.rate_defs, train)
        self.full_surr = SurrogateEvaluator(compiled.rate_defs, train)
        self._ds = train
        self._rates = self.full_rates
        self._surr = self.full_surr

    def begin_iteration(self):
        """Sample the batch shared by every player this step."""
        if self.batch_size:
            idx = self.rng.integers(0, len(self.train), size=self.batch_size)
            self._ds = self.train.subset(idx, name=f"{self.train.name}[batch]")
            self._rates = None
            self._surr = SurrogateEvaluator(self.compiled.rate_defs, self._ds,
                                            allow_empty=True)
        return self._ds

    def scores(self, model) -> np.ndarray:
        return model.scores(self._ds)

    def rates_from_scores(self, scores: np.ndarray) -> np.ndarray:
        """Rate estimates; nan marks selector-empty coordinates (minibatch)."""
        if self.batch_size == 0:
            return self.full_rates.rates_from_scores(scores)
        return self._surr.indicator_rates(scores)

    def surrogate(self) -> SurrogateEvaluator:
        return self._surr

    def exact_rates(self, model) -> np.ndarray:
        return self.full_rates.rates(model)


def _clipped(grad: np.ndarray, cfg: OgdConfig, what: str) -> np.ndarray:
    if np.any(~np.isfinite(grad)):
        raise OptimizationError(f"non-finite {what} gradient encountered: {grad}")
    norm = np.linalg.norm(grad)
    if norm > cfg.grad_clip:
        logger.warning("clipping %s gradient norm %.3g to %.3g", what, norm, cfg.grad_clip)
        return grad * (cfg.grad_clip / norm)
    return grad


def _resolve_kappa(problem: CompiledProblem, cfg: OgdConfig) -> float:
    if cfg.kappa is not None:
        return cfg.kappa
    if problem.spec.mode == "P1":
        return problem.metric_lipschitz_max()
    raise ConfigError(
        "kappa must be set for constrained problems (see kappa_preset for the "
        "(L+1)*T^omega preset)")


def _snapshot(trace, compiled, batcher, iteration, model, lam, aux):
    rates = batcher.exact_rates(model)
    trace.snapshots.append(TraceSnapshot(
        iteration=iteration,
        model=_copy_model(model),
        lam=np.array(lam, copy=True),
        aux={k: np.array(v, copy=True) for k, v in aux.items()},
        rates=rates,
        objective=compiled.objective_value(rates),
        violations=compiled.violations(rates),
    ))


def _copy_model(model):
    if isinstance(model, LinearModel):
        return LinearModel(model.weights.copy(), model.bias, model.norm_bound)
    return model


# --------------------------------------------------------------------------
# oracle-based optimizer


def run_oracle_game(problem: ProblemSpec, oracle, cfg: OgdConfig,
                    train: Dataset) -> Trace:
    """Best-response model player (via a CSO oracle) against OGD multipliers."""
    if problem.mode == "P3":
        raise ConfigError("the oracle game handles convex problems only")
    problem.require_convex("the oracle-based optimizer")
    compiled = problem.compile()
    kappa = _resolve_kappa(compiled, cfg)
    floor = compiled.lam_floor_vector(cfg.lam_floor if kappa > 0 else 0.0)
    if floor.sum() > kappa:
        raise ConfigError("lam_floor mass exceeds kappa")
    batcher = _Batcher(compiled, train, cfg)

    eta = cfg.eta_lambda
    if eta is None:
        bounds = _oracle_loop(compiled, oracle, cfg, batcher, kappa, floor,
                              eta=0.01, T=min(50, cfg.T), trace=None)
        eta = kappa / (bounds["lambda"] * np.sqrt(2 * cfg.T)) if kappa > 0 else 1.0
        batcher = _Batcher(compiled, train, cfg)

    trace = Trace([], metadata={
        "algorithm": "oracle-game", "kappa": kappa, "eta_lambda": eta,
        "T": cfg.T, "seed": cfg.seed, "batch_size": cfg.batch_size,
        "oracle": oracle.kind, "rho": oracle.rho,
        "constraints": compiled.constraint_names(),
        "mode": problem.mode, "dataset": train.name,
    })
    _oracle_loop(compiled, oracle, cfg, batcher, kappa, floor, eta, cfg.T, trace)
    return trace


def _oracle_loop(compiled, oracle, cfg, batcher, kappa, floor, eta, T, trace):
    lam = project_floored_l1_ball(np.zeros(compiled.lam_dim), kappa, floor)
    max_lam_grad = 1e-6
    warm = {}
    for t in range(T):
        batcher.begin_iteration()
        xi = compiled.best_response(lam, cfg.lam_floor, warm)
        coeffs = compiled.cost_coeffs(lam)
        model = oracle.solve(coeffs)
        rates = batcher.rates_from_scores(batcher.scores(model))
        grad = compiled.lam_gradient(rates, xi)
        max_lam_grad = max(max_lam_grad, float(np.linalg.norm(grad)))
        if trace is not None and (t + 1) % cfg.snapshot_every == 0:
            _snapshot(trace, compiled, batcher, t + 1, model, lam, {"xi": xi})
        lam = project_floored_l1_ball(lam + eta * _clipped(grad, cfg, "lambda"),
                                      kappa, floor)
    return {"lambda": max_lam_grad}


# --------------------------------------------------------------------------
# surrogate-based optimizer and the surrogate-everywhere variant


def run_surrogate_game(problem: ProblemSpec, cfg: OgdConfig, train: Dataset) -> Trace:
    """OGD model player on hinge surrogates; multipliers see true rates."""
    trace, _ = _surrogate_loop_driver(problem, cfg, train,
                                      lam_uses_surrogates=False,
                                      algorithm="surrogate-game")
    return trace


def run_spade_plus(problem: ProblemSpec, cfg: OgdConfig,
                   train: Dataset) -> tuple[LinearModel, Trace]:
    """Surrogate-everywhere variant; returns the parameter average.

    Identical to the surrogate game except the multiplier ascent consumes
    surrogate rates (clipped into the constraint domain box, with a warning
    when clipping bites).
    """
    if problem.mode != "P2":
        raise ConfigError("the surrogate-everywhere variant needs a constrained problem")
    trace, theta_bar = _surrogate_loop_driver(problem, cfg, train,
                                              lam_uses_surrogates=True,
                                              algorithm="spade-plus")
    model = LinearModel.from_param_vector(theta_bar, cfg.norm_bound)
    return model, trace


def _surrogate_loop_driver(problem, cfg, train, lam_uses_surrogates, algorithm):
    if problem.mode == "P3":
        raise ConfigError(f"{algorithm} handles convex problems only")
    problem.require_convex(algorithm)
    compiled = problem.compile()
    kappa = _resolve_kappa(compiled, cfg)
    floor = compiled.lam_floor_vector(cfg.lam_floor if kappa > 0 else 0.0)
    if floor.sum() > kappa:
        raise ConfigError("lam_floor mass exceeds kappa")
    batcher = _Batcher(compiled, train, cfg)

    eta_theta, eta_lambda = cfg.eta_theta, cfg.eta_lambda
    if eta_theta is None or eta_lambda is None:
        bounds, _, _ = _surrogate_loop(compiled, cfg, batcher, kappa, floor,
                                       0.01, 0.01, min(50, cfg.T), None,
                                       lam_uses_surrogates)
        if eta_theta is None:
            eta_theta = cfg.norm_bound / (bounds["theta"] * np.sqrt(cfg.T))
        if eta_lambda is None:
            eta_lambda = kappa / (bounds["lambda"] * np.sqrt(2 * cfg.T)) if kappa > 0 else 1.0
        batcher = _Batcher(compiled, train, cfg)

    trace = Trace([], metadata={
        "algorithm": algorithm, "kappa": kappa,
        "eta_theta": eta_theta, "eta_lambda": eta_lambda,
        "T": cfg.T, "seed": cfg.seed, "batch_size": cfg.batch_size,
        "constraints": compiled.constraint_names(),
        "mode": problem.mode, "dataset": train.name,
    })
    _, _, theta_bar = _surrogate_loop(compiled, cfg, batcher, kappa, floor,
                                      eta_theta, eta_lambda, cfg.T, trace,
                                      lam_uses_surrogates)
    return trace, theta_bar


def _surrogate_loop(compiled, cfg, batcher, kappa, floor, eta_theta, eta_lambda,
                    T, trace, lam_uses_surrogates):
    dim = batcher.train.dim + 1
    theta = np.zeros(dim)
    lam = project_floored_l1_ball(np.zeros(compiled.lam_dim), kappa, floor)
    theta_sum = np.zeros(dim)
    max_theta_grad = 1e-6
    max_lam_grad = 1e-6
    warned_clip = False
    warm = {}
    for t in range(T):
        batcher.begin_iteration()
        model = LinearModel.from_param_vector(theta, cfg.norm_bound)
        scores = batcher.scores(model)
        xi = compiled.best_response(lam, cfg.lam_floor, warm)
        coeffs = compiled.cost_coeffs(lam)

        theta_grad = batcher.surrogate().grad_from_coeffs(scores, coeffs)
        max_theta_grad = max(max_theta_grad, float(np.linalg.norm(theta_grad)))

        if lam_uses_surrogates:
            sides = ["upper" if d.sense == "increasing" else "lower"
                     for d in compiled.rate_defs]
            rates = batcher.surrogate().values_for_sides(scores, sides)
            clipped = np.clip(rates, 0.0, 1.0)
            if not warned_clip and np.any(clipped != rates):
                logger.warning("surrogate rates left [0, 1]; clipped for the multiplier step")
                warned_clip = True
            rates = clipped
        else:
            rates = batcher.rates_from_scores(scores)
        lam_grad = compiled.lam_gradient(rates, xi)
        max_lam_grad = max(max_lam_grad, float(np.linalg.norm(lam_grad)))

        theta = project_l2_ball(theta - eta_theta * _clipped(theta_grad, cfg, "theta"),
                                cfg.norm_bound)
        lam = project_floored_l1_ball(lam + eta_lambda * _clipped(lam_grad, cfg, "lambda"),
                                      kappa, floor)
        theta_sum += theta
        if trace is not None and (t + 1) % cfg.snapshot_every == 0:
            _snapshot(trace, compiled, batcher, t + 1,
                      LinearModel.from_param_vector(theta, cfg.norm_bound),
                      lam, {"xi": xi})
    return ({"theta": max_theta_grad, "lambda": max_lam_grad}, trace,
            theta_sum / max(T, 1))


# --------------------------------------------------------------------------
# sum-of-ratios optimizers


def _p3_layout(problem: ProblemSpec, compiled: CompiledProblem):
    if problem.mode != "P3":
        raise ConfigError("this optimizer expects sum-of-ratios parts")
    gammas = []
    for sors, is_obj in zip(compiled.ratio_specs, compiled.ratio_is_objective):
        gammas.append(None if is_obj else sors.gamma)
    return gammas


def run_slack_ratios(problem: ProblemSpec, cfg: OgdConfig, train: Dataset) -> Trace:
    """Numerator/denominator slack OGD against the ratio constraints.

    A minimized ratio objective is folded in as one extra constraint whose
    threshold is an epigraph variable descended alongside the model.
    Signed terms flip the roles of the slack inequalities (heuristic
    extension, recorded in the trace metadata).
    """
    compiled = problem.compile()
    gammas = _p3_layout(problem, compiled)
    if cfg.eta_theta is None or cfg.eta_lambda is None:
        raise ConfigError("slack-ratios needs explicit eta_theta and eta_lambda")
    if cfg.kappa is None:
        raise ConfigError("slack-ratios needs an explicit kappa")
    eta_aux = cfg.eta_aux if cfg.eta_aux is not None else cfg.eta_theta
    batcher = _Batcher(compiled, train, cfg)

    specs = compiled.ratio_specs
    n_c = len(specs)
    Ms = [s.M for s in specs]
    signs = [s.signs() for s in specs]
    lam_dim = sum(1 + 2 * m for m in Ms)
    lam = np.zeros(lam_dim)
    has_signed = any(np.any(sg < 0) for sg in signs)

    trace = Trace([], metadata={
        "algorithm": "slack-ratios", "kappa": cfg.kappa,
        "eta_theta": cfg.eta_theta, "eta_lambda": cfg.eta_lambda, "eta_aux": eta_aux,
        "T": cfg.T, "seed": cfg.seed, "batch_size": cfg.batch_size,
        "constraints": compiled.constraint_names(),
        "signed_terms_heuristic": has_signed,
        "mode": "P3", "dataset": train.name,
    })

    theta = np.zeros(train.dim + 1)
    a = [np.full(m, 0.5 * (s.lower + s.upper)) for m, s in zip(Ms, specs)]
    b = [np.full(m, 0.5 * (s.lower + s.upper)) for m, s in zip(Ms, specs)]
    tau, tau_max = _init_epigraph(compiled, batcher, theta, cfg)

    def lam_slices():
        out = []
        off = 0
        for m in Ms:
            out.append((off, off + 1 + 2 * m))
            off += 1 + 2 * m
        return out

    slices = lam_slices()
    for t in range(cfg.T):
        batcher.begin_iteration()
        model = LinearModel.from_param_vector(theta, cfg.norm_bound)
        scores = batcher.scores(model)
        rates = batcher.rates_from_scores(scores)
        coeffs = np.zeros(compiled.K)
        if compiled.acc_idx is not None:
            coeffs[compiled.acc_idx] -= 1.0

        new_a = [None] * n_c
        new_b = [None] * n_c
        lam_grad = np.zeros(lam_dim)
        new_tau = tau
        for c, sors in enumerate(specs):
            lo, hi = slices[c]
            lam0 = lam[lo]
            lam_num = lam[lo + 1:lo + 1 + Ms[c]]
            lam_den = lam[lo + 1 + Ms[c]:hi]
            sg = signs[c]
            nanmask = np.isnan(rates).astype(float)
            num = compiled.ratio_alpha[c] @ np.nan_to_num(rates, nan=0.0)
            den = compiled.ratio_beta[c] @ np.nan_to_num(rates, nan=0.0)
            present_num = (np.abs(compiled.ratio_alpha[c]) @ nanmask) == 0
            present_den = (np.abs(compiled.ratio_beta[c]) @ nanmask) == 0

            grad_a = sg * (lam0 / b[c] - lam_num)
            grad_b = sg * (-lam0 * a[c] / b[c] ** 2 + lam_den)
            new_a[c] = project_box(a[c] - eta_aux * grad_a, sors.lower, sors.upper)
            new_b[c] = project_box(b[c] - eta_aux * grad_b, sors.lower, sors.upper)

            coeffs += compiled.ratio_alpha[c].T @ (sg * lam_num)
            coeffs -= compiled.ratio_beta[c].T @ (sg * lam_den)

            gamma_eff = tau if gammas[c] is None else gammas[c]
            lam_grad[lo] = float(np.sum(sg * a[c] / b[c])) - gamma_eff
            lam_grad[lo + 1:lo + 1 + Ms[c]] = np.where(present_num, sg * (num - a[c]), 0.0)
            lam_grad[lo + 1 + Ms[c]:hi] = np.where(present_den, sg * (b[c] - den), 0.0)
            if gammas[c] is None:
                new_tau = float(np.clip(tau - eta_aux * (1.0 - lam0), 0.0, tau_max))
            if np.any(~np.isfinite(num)) or np.any(~np.isfinite(den)):
                raise OptimizationError(
                    f"non-finite ratio parts in {sors.name}: num={num}, den={den}")

        theta_grad = batcher.surrogate().grad_from_coeffs(scores, coeffs)
        theta = project_l2_ball(theta - cfg.eta_theta * _clipped(theta_grad, cfg, "theta"),
                                cfg.norm_bound)
        lam = project_nonneg_l1_ball(lam + cfg.eta_lambda * _clipped(lam_grad, cfg, "lambda"),
                                     cfg.kappa)
        a, b, tau = new_a, new_b, new_tau
        if (t + 1) % cfg.snapshot_every == 0:
            aux = {"a": np.concatenate(a), "b": np.concatenate(b)}
            if tau is not None:
                aux["tau"] = np.array([tau])
            _snapshot(trace, compiled, batcher, t + 1,
                      LinearModel.from_param_vector(theta, cfg.norm_bound), lam, aux)
    return trace


def run_biconvex(problem: ProblemSpec, cfg: OgdConfig, train: Dataset) -> Trace:
    """Ratio constraints via the square-completion identity
    a/b = min_u u^2 b - 2 u sqrt(b - a) + 1 (u* = sqrt(b - a) / b).

    The slack for each term stands for (denominator - numerator); its best
    response has the closed form (u * lam0 / lam_m)^2.  Requires every term
    sign to be +1 (compile differences in complement form first).
    """
    compiled = problem.compile()
    gammas = _p3_layout(problem, compiled)
    for sors in compiled.ratio_specs:
        if np.any(sors.signs() < 0):
            raise ConfigError(
                "the biconvex optimizer needs nonnegative term signs; "
                "use the complement-form compiler or the slack-ratios optimizer")
    if cfg.eta_theta is None or cfg.eta_lambda is None:
        raise ConfigError("biconvex needs explicit eta_theta and eta_lambda")
    if cfg.kappa is None:
        raise ConfigError("biconvex needs an explicit kappa")
    eta_aux = cfg.eta_aux if cfg.eta_aux is not None else cfg.eta_theta
    batcher = _Batcher(compiled, train, cfg)

    specs = compiled.ratio_specs
    Ms = [s.M for s in specs]
    lam_dim = sum(1 + m for m in Ms)
    floor = np.zeros(lam_dim)
    slices = []
    off = 0
    for m in Ms:
        slices.append((off, off + 1 + m))
        floor[off + 1:off + 1 + m] = cfg.lam_floor
        off += 1 + m
    if floor.sum() > cfg.kappa:
        raise ConfigError("lam_floor mass exceeds kappa")
    lam = project_floored_l1_ball(np.zeros(lam_dim), cfg.kappa, floor)

    trace = Trace([], metadata={
        "algorithm": "biconvex", "kappa": cfg.kappa,
        "eta_theta": cfg.eta_theta, "eta_lambda": cfg.eta_lambda, "eta_aux": eta_aux,
        "T": cfg.T, "seed": cfg.seed, "batch_size": cfg.batch_size,
        "constraints": compiled.constraint_names(),
        "mode": "P3", "dataset": train.name,
    })

    theta = np.zeros(train.dim + 1)
    u_maxes = [cfg.u_max if cfg.u_max is not None else np.sqrt(s.lower) / s.upper
               for s in specs]
    u = [np.full(m, 0.5 * um) for m, um in zip(Ms, u_maxes)]
    xi_max = [s.upper - s.lower for s in specs]
    tau, tau_max = _init_epigraph(compiled, batcher, theta, cfg)

    for t in range(cfg.T):
        batcher.begin_iteration()
        model = LinearModel.from_param_vector(theta, cfg.norm_bound)
        scores = batcher.scores(model)
        rates = batcher.rates_from_scores(scores)
        coeffs = np.zeros(compiled.K)
        if compiled.acc_idx is not None:
            coeffs[compiled.acc_idx] -= 1.0

        lam_grad = np.zeros(lam_dim)
        new_u = [None] * len(specs)
        new_tau = tau
        xis = []
        for c, sors in enumerate(specs):
            lo, hi = slices[c]
            lam0 = lam[lo]
            lam_m = np.maximum(lam[lo + 1:hi], cfg.lam_floor)
            nanmask = np.isnan(rates).astype(float)
            num = compiled.ratio_alpha[c] @ np.nan_to_num(rates, nan=0.0)
            den = compiled.ratio_beta[c] @ np.nan_to_num(rates, nan=0.0)
            present = (((np.abs(compiled.ratio_alpha[c]) @ nanmask) == 0)
                       & ((np.abs(compiled.ratio_beta[c]) @ nanmask) == 0))

            xi = np.clip((u[c] * lam0 / lam_m) ** 2, 0.0, xi_max[c])
            xis.append(xi)

            coeffs += compiled.ratio_beta[c].T @ (lam0 * u[c] ** 2)
            coeffs += compiled.ratio_alpha[c].T @ lam_m
            coeffs -= compiled.ratio_beta[c].T @ lam_m

            grad_u = lam0 * (2.0 * u[c] * den - 2.0 * np.sqrt(xi))
            new_u[c] = project_box(u[c] - eta_aux * np.where(present, grad_u, 0.0),
                                   0.0, u_maxes[c])

            phi = u[c] ** 2 * den - 2.0 * u[c] * np.sqrt(xi) + 1.0
            gamma_eff = tau if gammas[c] is None else gammas[c]
            lam_grad[lo] = float(np.sum(np.where(present, phi, 0.0))) - gamma_eff
            lam_grad[lo + 1:hi] = np.where(present, xi - den + num, 0.0)
            if gammas[c] is None:
                new_tau = float(np.clip(tau - eta_aux * (1.0 - lam0), 0.0, tau_max))

        theta_grad = batcher.surrogate().grad_from_coeffs(scores, coeffs)
        theta = project_l2_ball(theta - cfg.eta_theta * _clipped(theta_grad, cfg, "theta"),
                                cfg.norm_bound)
        lam = project_floored_l1_ball(lam + cfg.eta_lambda * _clipped(lam_grad, cfg, "lambda"),
                                      cfg.kappa, floor)
        u, tau = new_u, new_tau
        if (t + 1) % cfg.snapshot_every == 0:
            aux = {"u": np.concatenate(u), "xi": np.concatenate(xis)}
            if tau is not None:
                aux["tau"] = np.array([tau])
            _snapshot(trace, compiled, batcher, t + 1,
                      LinearModel.from_param_vector(theta, cfg.norm_bound), lam, aux)
    return trace


def _init_epigraph(compiled, batcher, theta, cfg):
    """Initial epigraph value/ceiling for a folded ratio objective."""
    if not any(compiled.ratio_is_objective):
        return None, None
    c = compiled.ratio_is_objective.index(True)
    sors = compiled.ratio_specs[c]
    tau_max = sors.M * sors.upper / sors.lower
    model = LinearModel.from_param_vector(theta, cfg.norm_bound)
    rates = batcher.exact_rates(model)
    num, den = sors.clipped_parts(rates[compiled.ratio_idx[c]])
    tau0 = float(np.clip(np.sum(sors.signs() * num / den), 0.0, tau_max))
    return tau0, tau_max
