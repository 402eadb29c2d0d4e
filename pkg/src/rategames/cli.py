"""Command-line entry points: train, sweep, report, baselines.

All verbs read one nested key/value config file; any setting can be
overridden on the command line as --section.key=value (values parsed as
YAML, so lists and numbers work).  Exit codes: 0 success, 2 when the
shrinking LP fell back to the least-violation mixture, 1 on error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import yaml

from . import harness
from .data import load_tabular_dataset, split_dataset, standardize_splits
from .exceptions import RateGamesError
from .harness import (ExperimentConfig, Report, ReportRow, baseline_post_shift,
                      baseline_unc_error, baseline_unc_f1, config_from_file,
                      emit_report, error_rate, f1_score)
from .shrinking import shrink


def _parse_overrides(tokens: list[str]) -> dict:
    overrides = {}
    for token in tokens:
        if not token.startswith("--") or "=" not in token:
            raise RateGamesError(
                f"unrecognized argument {token!r}; overrides look like --section.key=value")
        dotted, raw_value = token[2:].split("=", 1)
        overrides[dotted] = yaml.safe_load(raw_value)
    return overrides


def _load_config(args, extra) -> ExperimentConfig:
    return config_from_file(args.config, _parse_overrides(extra))


def cmd_train(args, extra) -> int:
    cfg = _load_config(args, extra)
    cfg = harness.ExperimentConfig(**{**cfg.__dict__,
                                      "sweep_eta_theta": (args.eta_theta,),
                                      "sweep_eta_lambda": (args.eta_lambda,)})
    report = harness.run_experiment(cfg)
    csv_path, txt_path = emit_report(report, cfg.output_dir)
    print(Path(txt_path).read_text(), end="")
    return 2 if report.shrink_fallback else 0


def cmd_sweep(args, extra) -> int:
    cfg = _load_config(args, extra)
    report = harness.run_experiment(cfg)
    csv_path, txt_path = emit_report(report, cfg.output_dir)
    print(Path(txt_path).read_text(), end="")
    print(f"selected: {report.selected}")
    return 2 if report.shrink_fallback else 0


def cmd_report(args, extra) -> int:
    """Recompute report rows from stored traces (no retraining)."""
    cfg = _load_config(args, extra)
    from .games import Trace
    ds = load_tabular_dataset(cfg.dataset_path, cfg.schema)
    train, val, test = standardize_splits(*split_dataset(ds, cfg.seed))
    unc = baseline_unc_error(train, val, steps=cfg.baseline_steps,
                             step_grid=cfg.baseline_step_grid)
    unc_train_err = error_rate(unc, train)
    if cfg.task == "kld-parity":
        problem = harness.build_kld_parity_problem(train, unc_train_err, cfg.error_slack)
    elif cfg.task == "fmeasure-parity":
        groups = [int(g) for g in train.group_ids]
        other = next(g for g in groups if g != cfg.protected_group)
        problem = harness.build_fmeasure_parity_problem(
            train, cfg.protected_group, other, cfg.parity_delta,
            cfg.ratio_lower, cfg.ratio_upper)
    else:
        problem = harness.build_custom_problem(train, cfg.custom_metric,
                                               cfg.custom_error_slack, unc_train_err)
    compiled = problem.compile()
    report = Report(task=cfg.task, dataset=ds.name, algorithm=cfg.algorithm)
    fallback = False
    shrink_ds = train if cfg.shrink_split == "train" else val
    for trace_path in sorted(Path(cfg.output_dir).glob("trace_*.jsonl")):
        trace = Trace.load(trace_path)
        stochastic, lp_result = shrink(trace, problem, shrink_ds)
        fallback = fallback or lp_result.status != "optimal"
        rates = harness._mixture_rates(stochastic, compiled.rate_defs, test)
        objective = compiled.objective_value(rates)
        violations = compiled.violations(rates)
        constraint = float(violations.max()) if violations.size else 0.0
        report.rows.append(ReportRow(trace_path.stem, objective, constraint,
                                     trace_path=str(trace_path)))
    csv_path, txt_path = emit_report(report, cfg.output_dir)
    print(Path(txt_path).read_text(), end="")
    return 2 if fallback else 0


def cmd_baselines(args, extra) -> int:
    cfg = _load_config(args, extra)
    ds = load_tabular_dataset(cfg.dataset_path, cfg.schema)
    train, val, test = standardize_splits(*split_dataset(ds, cfg.seed))
    unc = baseline_unc_error(train, val, steps=cfg.baseline_steps,
                             step_grid=cfg.baseline_step_grid)
    rows = [("UncError", error_rate(unc, test), f1_score(unc, test))]
    tuned = baseline_unc_f1(train, val, steps=cfg.baseline_steps,
                            step_grid=cfg.baseline_step_grid)
    rows.append(("UncF1", error_rate(tuned, test), f1_score(tuned, test)))
    if len(train.group_ids) >= 2:
        shifted = baseline_post_shift(train, steps=cfg.baseline_steps)
        err = float(sum(w * error_rate(m, test) for m, w in shifted.atoms))
        f1 = float(sum(w * f1_score(m, test) for m, w in shifted.atoms))
        rows.append(("PostShift", err, f1))
    print(f"{'method':<12} {'test_error':>10} {'test_f1':>8}")
    for name, err, f1 in rows:
        print(f"{name:<12} {err:>10.4f} {f1:>8.4f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="rategames",
        description="Train linear classifiers under generalized rate-metric "
                    "objectives and constraints.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_train = sub.add_parser("train", help="single training run at fixed step sizes")
    p_train.add_argument("-c", "--config", required=True)
    p_train.add_argument("--eta-theta", type=float, default=0.1)
    p_train.add_argument("--eta-lambda", type=float, default=0.1)
    p_train.set_defaults(func=cmd_train)

    p_sweep = sub.add_parser("sweep", help="full step-size sweep with validation selection")
    p_sweep.add_argument("-c", "--config", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    p_report = sub.add_parser("report", help="recompute the report from stored traces")
    p_report.add_argument("-c", "--config", required=True)
    p_report.set_defaults(func=cmd_report)

    p_base = sub.add_parser("baselines", help="run the reference baselines only")
    p_base.add_argument("-c", "--config", required=True)
    p_base.set_defaults(func=cmd_baselines)

    args, extra = parser.parse_known_args(argv)
    try:
        return args.func(args, extra)
    except RateGamesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
