"""Experiment harness: configs, baselines, sweeps, and report emission.

Two built-in tasks mirror the fairness experiments this library reproduces:

  * ``kld-parity``: minimize the summed divergence between each group's
    positive-prediction proportion and the global positive proportion,
    subject to the training error staying within a factor of the
    unconstrained error.
  * ``fmeasure-parity``: maximize overall F1 subject to the protected group's
    F1 not trailing the remaining population's by more than a slack.

Sweeps run one training per (eta_theta, eta_lambda) grid point, select on
validation, and evaluate the chosen point's stochastic (shrunk) and
deterministic (best-iterate) classifiers on the test split.
"""

from __future__ import annotations

import copy
import csv
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .data import (ColumnSchema, Dataset, GroupwiseModel, LinearModel,
                   RateDefinition, StochasticModel, load_tabular_dataset,
                   predictions_from_scores, split_dataset, standardize_splits,
                   stochastic_rates)
from .cso import fit_logistic
from .exceptions import ConfigError, DataError
from .games import (OgdConfig, ProblemSpec, Trace, run_biconvex,
                    run_oracle_game, run_slack_ratios, run_spade_plus,
                    run_surrogate_game)
from .metrics import (LinearRateConstraint, RatioTerm, SumOfRatiosSpec,
                      build_metric, compile_parity_constraint, concat_metrics)
from .cso import plugin_oracle
from .shrinking import best_iterate, shrink

DECLARED_STEP_SIZES = (0.001, 0.01, 0.1, 1.0)
ACCURACY_DEF = RateDefinition(target="agree", sense="increasing", name="accuracy")


# --------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """One experiment: task, dataset, algorithm, and sweep grids."""

    task: str
    dataset_path: str
    schema: ColumnSchema
    algorithm: str = "alg2"
    seed: int = 0
    output_dir: str = "out"
    # training
    T: int = 5000
    kappa: float = 8.0
    lam_floor: float = 1e-3
    batch_size: int = 0
    snapshot_every: int = 10
    norm_bound: float = 10.0
    eta_aux: float | None = None
    u_max: float | None = None
    # sweep grids
    sweep_eta_theta: tuple = DECLARED_STEP_SIZES
    sweep_eta_lambda: tuple = DECLARED_STEP_SIZES
    # task parameters
    error_slack: float = 1.1
    parity_delta: float = 0.01
    protected_group: int = 0
    ratio_lower: float = 0.02
    ratio_upper: float = 2.2
    custom_metric: str = "gmean"
    custom_error_slack: float | None = None
    # selection / post-processing
    val_tolerance: float = 0.02
    shrink_split: str = "train"
    # baselines
    baseline_steps: int = 2500
    baseline_step_grid: tuple = DECLARED_STEP_SIZES

    def __post_init__(self):
        if self.task not in ("kld-parity", "fmeasure-parity", "custom"):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.algorithm not in ("alg1", "alg2", "spade+", "alg3", "alg4"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.task == "fmeasure-parity" and self.algorithm not in ("alg3", "alg4"):
            raise ConfigError("fmeasure-parity is a sum-of-ratios task; use alg3 or alg4")
        if self.task != "fmeasure-parity" and self.algorithm in ("alg3", "alg4"):
            raise ConfigError(f"{self.algorithm} expects a sum-of-ratios task")
        for grid_name in ("sweep_eta_theta", "sweep_eta_lambda", "baseline_step_grid"):
            grid = getattr(self, grid_name)
            bad = [s for s in grid if s not in DECLARED_STEP_SIZES]
            if bad:
                raise ConfigError(
                    f"{grid_name} values {bad} are outside the declared set "
                    f"{DECLARED_STEP_SIZES}")
        if self.shrink_split not in ("train", "validation"):
            raise ConfigError("shrink_split must be 'train' or 'validation'")

    def ogd(self, eta_theta: float | None, eta_lambda: float | None) -> OgdConfig:
        return OgdConfig(T=self.T, eta_theta=eta_theta, eta_lambda=eta_lambda,
                         eta_aux=self.eta_aux, kappa=self.kappa,
                         lam_floor=self.lam_floor, batch_size=self.batch_size,
                         snapshot_every=self.snapshot_every, seed=self.seed,
                         norm_bound=self.norm_bound, u_max=self.u_max)


def config_from_file(path, overrides: dict | None = None) -> ExperimentConfig:
    """Load the nested key/value run configuration, applying dotted overrides."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if overrides:
        for dotted, value in overrides.items():
            node = raw
            keys = dotted.split(".")
            for key in keys[:-1]:
                node = node.setdefault(key, {})
            node[keys[-1]] = value
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    dataset = raw.get("dataset", {})
    schema_raw = dataset.get("schema", {})
    try:
        schema = ColumnSchema(
            label=schema_raw["label"],
            group=schema_raw["group"],
            positive_label=schema_raw.get("positive_label"),
            features=schema_raw.get("features"),
            categorical=schema_raw.get("categorical", []),
            delimiter=schema_raw.get("delimiter", ","),
            include_group_as_feature=schema_raw.get("include_group_as_feature", True),
        )
    except KeyError as exc:
        raise ConfigError(f"dataset.schema is missing {exc}") from None
    path = dataset.get("path")
    if path is None:
        raise ConfigError("dataset.path is required")
    if not os.path.isabs(path) and not os.path.exists(path):
        data_dir = os.environ.get("RATEGAMES_DATA_DIR")
        if data_dir and os.path.exists(os.path.join(data_dir, path)):
            path = os.path.join(data_dir, path)

    train_raw = raw.get("train", {})
    sweep_raw = raw.get("sweep", {})
    task_raw = raw.get("task_params", {})
    val_raw = raw.get("validation", {})
    base_raw = raw.get("baselines", {})
    kwargs = dict(
        task=raw.get("task", "custom"),
        dataset_path=path,
        schema=schema,
        algorithm=raw.get("algorithm", "alg2"),
        seed=raw.get("seed", 0),
        output_dir=raw.get("output_dir", "out"),
        T=train_raw.get("T", 5000),
        kappa=train_raw.get("kappa", 8.0),
        lam_floor=train_raw.get("lam_floor", 1e-3),
        batch_size=train_raw.get("batch_size", 0),
        snapshot_every=train_raw.get("snapshot_every", 10),
        norm_bound=train_raw.get("norm_bound", 10.0),
        eta_aux=train_raw.get("eta_aux"),
        u_max=train_raw.get("u_max"),
        sweep_eta_theta=tuple(sweep_raw.get("eta_theta", DECLARED_STEP_SIZES)),
        sweep_eta_lambda=tuple(sweep_raw.get("eta_lambda", DECLARED_STEP_SIZES)),
        error_slack=task_raw.get("error_slack", 1.1),
        parity_delta=task_raw.get("parity_delta", 0.01),
        protected_group=task_raw.get("protected_group", 0),
        ratio_lower=task_raw.get("ratio_lower", 0.02),
        ratio_upper=task_raw.get("ratio_upper", 2.2),
        custom_metric=task_raw.get("metric", "gmean"),
        custom_error_slack=task_raw.get("custom_error_slack"),
        val_tolerance=val_raw.get("tolerance", 0.02),
        shrink_split=raw.get("shrink_split", "train"),
        baseline_steps=base_raw.get("steps", 2500),
        baseline_step_grid=tuple(base_raw.get("step_grid", DECLARED_STEP_SIZES)),
    )
    return ExperimentConfig(**kwargs)


# --------------------------------------------------------------------------
# simple linear trainers and baselines


def fit_hinge(train: Dataset, steps: int = 2500, step_size: float = 0.1) -> LinearModel:
    """Full-batch subgradient descent on the mean hinge loss."""
    if train.p in (0.0, 1.0):
        raise DataError("cannot train a classifier on a single-class dataset")
    n, d = train.features.shape
    X, y = train.features, train.labels.astype(float)
    theta = np.zeros(d + 1)
    for t in range(steps):
        margins = y * (X @ theta[:-1] + theta[-1])
        active = margins < 1.0
        coef = -(y * active) / n
        step = step_size / np.sqrt(t + 1.0)
        theta[:-1] -= step * (X.T @ coef)
        theta[-1] -= step * coef.sum()
    return LinearModel(theta[:-1], theta[-1])


def error_rate(model, ds: Dataset) -> float:
    return float(np.mean(model.predictions(ds) != ds.labels))


def f1_score(model, ds: Dataset) -> float:
    preds = model.predictions(ds)
    tp = np.sum((preds == 1) & (ds.labels == 1))
    fp = np.sum((preds == 1) & (ds.labels == -1))
    fn = np.sum((preds == -1) & (ds.labels == 1))
    denom = 2 * tp + fp + fn
    return float(2 * tp / denom) if denom else 0.0


def baseline_unc_error(train: Dataset, val: Dataset, *, steps: int = 2500,
                       step_grid=DECLARED_STEP_SIZES) -> LinearModel:
    """Unconstrained hinge classifier; step size picked on validation error."""
    best = None
    for step in step_grid:
        model = fit_hinge(train, steps=steps, step_size=step)
        err = error_rate(model, val)
        if best is None or err < best[0] - 1e-12:
            best = (err, model)
    return best[1]


def baseline_unc_f1(train: Dataset, val: Dataset, *, steps: int = 2500,
                    step_grid=DECLARED_STEP_SIZES) -> LinearModel:
    """Score threshold on the unconstrained classifier maximizing train F1.

    The candidate set covers every cut position of the sorted scores plus the
    zero shift, so the tuned model never scores below the untuned one on
    train F1.
    """
    base = baseline_unc_error(train, val, steps=steps, step_grid=step_grid)
    scores = np.sort(np.unique(base.scores(train)))
    cuts = [scores[0] - 1.0]
    cuts += [0.5 * (a + b) for a, b in zip(scores[:-1], scores[1:])]
    cuts += [scores[-1] + 1.0, 0.0]
    best_shift, best_f1 = 0.0, -1.0
    for cut in cuts:
        shifted = LinearModel(base.weights, base.bias - cut)
        f1 = f1_score(shifted, train)
        if f1 > best_f1 + 1e-12:
            best_shift, best_f1 = -cut, f1
    return LinearModel(base.weights, base.bias + best_shift)


def baseline_post_shift(train: Dataset, *, steps: int = 2500,
                        step_size: float = 1.0) -> StochasticModel:
    """Per-group thresholds on a class-probability model matching each
    group's positive-prediction rate to the global positive proportion."""
    groups = train.group_ids
    if len(groups) < 2:
        raise DataError("post-shift needs at least two groups")
    eta_model = fit_logistic(train, steps=steps, step_size=step_size)
    scores = eta_model.scores(train)
    p = train.p
    shifts = {}
    for g in groups:
        gscores = np.sort(scores[train.groups == g])[::-1]
        n_g = gscores.size
        k = int(round(p * n_g))
        if k <= 0:
            cut = gscores[0] + 1.0
        elif k >= n_g:
            cut = gscores[-1] - 1.0
        else:
            cut = 0.5 * (gscores[k - 1] + gscores[k])
        shifts[int(g)] = -cut
    return StochasticModel.point_mass(GroupwiseModel(base=eta_model, shifts=shifts))


# --------------------------------------------------------------------------
# task problem builders


def build_kld_parity_problem(train: Dataset, unc_train_error: float,
                             error_slack: float = 1.1) -> ProblemSpec:
    """Summed per-group coverage divergence objective + train-error cap."""
    p = train.p
    rdefs = []
    parts = []
    for g in train.group_ids:
        rdefs.append(RateDefinition(target="predict-positive", group=int(g),
                                    sense="decreasing", name=f"coverage_g{g}"))
        rdefs.append(RateDefinition(target="predict-negative", group=int(g),
                                    sense="decreasing", name=f"coverage_comp_g{g}"))
        parts.append(build_metric("kld", p=p))
    objective = concat_metrics(parts, name="group-coverage-divergence")
    cap = LinearRateConstraint(weights=np.array([-1.0]),
                               bound=error_slack * unc_train_error - 1.0,
                               name="error-cap")
    return ProblemSpec(objective_metric=(objective, rdefs),
                       linear_constraints=[(cap, [ACCURACY_DEF])])


def _overall_f_objective(train: Dataset, lower: float, upper: float) -> SumOfRatiosSpec:
    p = train.p
    rdefs = [
        RateDefinition(target="predict-positive", label=1, sense="increasing", name="tpr"),
        RateDefinition(target="predict-positive", label=-1, sense="increasing", name="fpr"),
        RateDefinition(target="predict-negative", label=1, sense="increasing", name="fnr"),
    ]
    comp_num = (0.0, 1.0 - p, p)
    den = (2.0 * p, 1.0 - p, p)
    return SumOfRatiosSpec([RatioTerm(comp_num, den, 1)], gamma=0.0,
                           lower=lower, upper=upper, rdefs=rdefs,
                           name="fmeasure-objective",
                           transform="minimizes 1 - F of the full population")


def build_fmeasure_parity_problem(train: Dataset, protected_group: int,
                                  other_group: int, delta: float = 0.01,
                                  lower: float = 0.02, upper: float = 2.2) -> ProblemSpec:
    parity = compile_parity_constraint("fmeasure-parity", protected_group,
                                       other_group, delta, train,
                                       lower=lower, upper=upper)
    objective = _overall_f_objective(train, lower, upper)
    return ProblemSpec(ratio_objective=objective, ratio_constraints=[parity])


def build_custom_problem(train: Dataset, metric_kind: str,
                         error_slack: float | None,
                         unc_train_error: float | None) -> ProblemSpec:
    metric = build_metric(metric_kind, p=train.p if metric_kind == "kld" else None)
    if metric_kind in ("gmean", "hmean"):
        rdefs = [RateDefinition(target="predict-positive", label=1,
                                sense="decreasing", name="tpr"),
                 RateDefinition(target="predict-negative", label=-1,
                                sense="decreasing", name="tnr")]
    elif metric_kind == "qmean":
        rdefs = [RateDefinition(target="predict-positive", label=-1,
                                sense="increasing", name="fpr"),
                 RateDefinition(target="predict-negative", label=1,
                                sense="increasing", name="fnr")]
    elif metric_kind == "kld":
        rdefs = [RateDefinition(target="predict-positive",
                                sense="decreasing", name="coverage"),
                 RateDefinition(target="predict-negative",
                                sense="decreasing", name="coverage_comp")]
    else:
        raise ConfigError(f"custom task does not support metric {metric_kind!r}")
    linear = []
    if error_slack is not None:
        if unc_train_error is None:
            raise ConfigError("an error cap needs the unconstrained train error")
        cap = LinearRateConstraint(weights=np.array([-1.0]),
                                   bound=error_slack * unc_train_error - 1.0,
                                   name="error-cap")
        linear.append((cap, [ACCURACY_DEF]))
    return ProblemSpec(objective_metric=(metric, rdefs), linear_constraints=linear)


# --------------------------------------------------------------------------
# sweep, selection, reporting


@dataclass
class ReportRow:
    method: str
    objective: float
    constraint: float
    eta_theta: float | None = None
    eta_lambda: float | None = None
    runtime_s: float = 0.0
    trace_path: str = ""


@dataclass
class Report:
    task: str
    dataset: str
    algorithm: str
    rows: list[ReportRow] = field(default_factory=list)
    shrink_fallback: bool = False
    selected: dict = field(default_factory=dict)


def _run_algorithm(cfg: ExperimentConfig, problem: ProblemSpec, train: Dataset,
                   eta_theta: float, eta_lambda: float):
    ogd = cfg.ogd(eta_theta, eta_lambda)
    if cfg.algorithm == "alg1":
        oracle = plugin_oracle(train, problem.compile().rate_defs)
        return run_oracle_game(problem, oracle, ogd, train)
    if cfg.algorithm == "alg2":
        return run_surrogate_game(problem, ogd, train)
    if cfg.algorithm == "spade+":
        _, trace = run_spade_plus(problem, ogd, train)
        return trace
    if cfg.algorithm == "alg3":
        return run_slack_ratios(problem, ogd, train)
    return run_biconvex(problem, ogd, train)


def _mixture_rates(model, rate_defs, ds: Dataset) -> np.ndarray:
    if isinstance(model, StochasticModel):
        return stochastic_rates(model, rate_defs, ds)
    from .data import evaluate_rate_vector
    return evaluate_rate_vector(model, rate_defs, ds)


def _model_error(model, ds: Dataset) -> float:
    if isinstance(model, StochasticModel):
        return float(sum(w * error_rate(m, ds) for m, w in model.atoms))
    return error_rate(model, ds)


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Full pipeline: load, split, baselines, sweep, select, evaluate, report."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ds = load_tabular_dataset(cfg.dataset_path, cfg.schema)
    train, val, test = standardize_splits(*split_dataset(ds, cfg.seed))

    t0 = time.perf_counter()
    unc = baseline_unc_error(train, val, steps=cfg.baseline_steps,
                             step_grid=cfg.baseline_step_grid)
    unc_runtime = time.perf_counter() - t0
    unc_train_err = error_rate(unc, train)
    unc_test_err = max(error_rate(unc, test), 1e-12)

    if cfg.task == "kld-parity":
        problem = build_kld_parity_problem(train, unc_train_err, cfg.error_slack)
    elif cfg.task == "fmeasure-parity":
        groups = [int(g) for g in train.group_ids]
        if cfg.protected_group not in groups:
            raise ConfigError(f"protected group {cfg.protected_group} absent from train")
        other = next(g for g in groups if g != cfg.protected_group)
        problem = build_fmeasure_parity_problem(
            train, cfg.protected_group, other, cfg.parity_delta,
            cfg.ratio_lower, cfg.ratio_upper)
    else:
        problem = build_custom_problem(train, cfg.custom_metric,
                                       cfg.custom_error_slack, unc_train_err)

    compiled = problem.compile()
    report = Report(task=cfg.task, dataset=ds.name, algorithm=cfg.algorithm)

    def task_metrics(model, eval_ds: Dataset) -> tuple[float, float]:
        """(objective metric, constraint metric) in reporting units."""
        rates = _mixture_rates(model, compiled.rate_defs, eval_ds)
        if cfg.task == "kld-parity":
            objective = compiled.objective_value(rates)
            ratio = _model_error(model, eval_ds) / (unc_test_err if eval_ds is test
                                                    else max(error_rate(unc, eval_ds), 1e-12))
            return objective, ratio
        if cfg.task == "fmeasure-parity":
            f1 = 1.0 - compiled.objective_value(rates)
            violations = compiled.violations(rates)
            return f1, float(violations.max()) if violations.size else 0.0
        objective = compiled.objective_value(rates)
        violations = compiled.violations(rates)
        return objective, float(violations.max()) if violations.size else 0.0

    # baselines
    unc_obj, unc_con = task_metrics(unc, test)
    report.rows.append(ReportRow("UncError", unc_obj, unc_con, runtime_s=unc_runtime))
    if cfg.task == "fmeasure-parity":
        t0 = time.perf_counter()
        tuned = baseline_unc_f1(train, val, steps=cfg.baseline_steps,
                                step_grid=cfg.baseline_step_grid)
        obj, con = task_metrics(tuned, test)
        report.rows.append(ReportRow("UncF1", obj, con,
                                     runtime_s=time.perf_counter() - t0))
    if cfg.task == "kld-parity" and len(train.group_ids) >= 2:
        t0 = time.perf_counter()
        shifted = baseline_post_shift(train, steps=cfg.baseline_steps)
        obj, con = task_metrics(shifted, test)
        report.rows.append(ReportRow("PostShift", obj, con,
                                     runtime_s=time.perf_counter() - t0))

    # sweep
    shrink_ds = train if cfg.shrink_split == "train" else val
    candidates = []
    for eta_theta in cfg.sweep_eta_theta:
        for eta_lambda in cfg.sweep_eta_lambda:
            t0 = time.perf_counter()
            trace = _run_algorithm(cfg, problem, train, eta_theta, eta_lambda)
            runtime = time.perf_counter() - t0
            trace_path = out_dir / f"trace_{cfg.algorithm}_t{eta_theta:g}_l{eta_lambda:g}.jsonl"
            trace.save(trace_path)
            stochastic, lp_result = shrink(trace, problem, shrink_ds)
            deterministic = best_iterate(trace, problem, val, cfg.val_tolerance)
            val_rates = _mixture_rates(stochastic, compiled.rate_defs, val)
            val_obj = compiled.objective_value(val_rates)
            val_violations = compiled.violations(val_rates)
            val_viol = float(val_violations.max()) if val_violations.size else 0.0
            candidates.append({
                "eta_theta": eta_theta, "eta_lambda": eta_lambda,
                "trace": trace, "trace_path": str(trace_path),
                "stochastic": stochastic, "deterministic": deterministic,
                "lp_status": lp_result.status, "runtime": runtime,
                "val_obj": val_obj, "val_viol": val_viol,
            })

    chosen = select_sweep_point(candidates, cfg.val_tolerance)
    report.selected = {"eta_theta": chosen["eta_theta"],
                       "eta_lambda": chosen["eta_lambda"],
                       "validation_objective": chosen["val_obj"],
                       "validation_violation": chosen["val_viol"]}
    report.shrink_fallback = chosen["lp_status"] != "optimal"

    obj, con = task_metrics(chosen["stochastic"], test)
    report.rows.append(ReportRow(f"{cfg.algorithm}-stochastic", obj, con,
                                 chosen["eta_theta"], chosen["eta_lambda"],
                                 chosen["runtime"], chosen["trace_path"]))
    obj, con = task_metrics(chosen["deterministic"], test)
    report.rows.append(ReportRow(f"{cfg.algorithm}-deterministic", obj, con,
                                 chosen["eta_theta"], chosen["eta_lambda"],
                                 chosen["runtime"], chosen["trace_path"]))
    return report


def select_sweep_point(candidates: list[dict], tolerance: float) -> dict:
    """Feasible-on-validation with least objective, else least violation."""
    feasible = [c for c in candidates if c["val_viol"] <= tolerance]
    if feasible:
        return min(feasible, key=lambda c: (c["val_obj"], c["eta_theta"], c["eta_lambda"]))
    return min(candidates, key=lambda c: (c["val_viol"], c["eta_theta"], c["eta_lambda"]))


# --------------------------------------------------------------------------
# report emission


REPORT_COLUMNS = ("method", "objective", "constraint", "eta_theta", "eta_lambda",
                  "runtime_s", "trace_path")


def emit_report(report: Report, out_dir) -> tuple[Path, Path]:
    """Write the report as CSV and as an aligned text table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    txt_path = out_dir / "report.txt"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow([row.method, f"{row.objective:.6f}", f"{row.constraint:.6f}",
                             "" if row.eta_theta is None else f"{row.eta_theta:g}",
                             "" if row.eta_lambda is None else f"{row.eta_lambda:g}",
                             f"{row.runtime_s:.3f}", row.trace_path])
    cells = [list(REPORT_COLUMNS)]
    for row in report.rows:
        cells.append([row.method, f"{row.objective:.4f}", f"{row.constraint:.4f}",
                      "" if row.eta_theta is None else f"{row.eta_theta:g}",
                      "" if row.eta_lambda is None else f"{row.eta_lambda:g}",
                      f"{row.runtime_s:.1f}", row.trace_path])
    widths = [max(len(r[i]) for r in cells) for i in range(len(REPORT_COLUMNS))]
    with txt_path.open("w") as fh:
        fh.write(f"task={report.task} dataset={report.dataset} algorithm={report.algorithm}\n")
        for r in cells:
            fh.write("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")
    return csv_path, txt_path


def read_report_csv(path) -> list[ReportRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(ReportRow(
                method=rec["method"],
                objective=float(rec["objective"]),
                constraint=float(rec["constraint"]),
                eta_theta=float(rec["eta_theta"]) if rec["eta_theta"] else None,
                eta_lambda=float(rec["eta_lambda"]) if rec["eta_lambda"] else None,
                runtime_s=float(rec["runtime_s"]),
                trace_path=rec["trace_path"],
            ))
    return rows
