#!/usr/bin/env python3
"""Run the full fairness-experiment suite and emit the summary tables.

Covers the coverage-divergence task (both benchmark replicas, surrogate
optimizer) and the F-measure parity task (both sum-of-ratios optimizers),
writing one report per config under its output directory.
"""

import argparse
import sys
import time
from pathlib import Path

from rategames.harness import config_from_file, emit_report, run_experiment
from rategames.synth import ensure_benchmark_csv

CONFIGS = [
    "configs/compas_kld.yaml",
    "configs/adult_kld.yaml",
    "configs/compas_fmeasure_alg3.yaml",
    "configs/compas_fmeasure_alg4.yaml",
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default="data")
    parser.add_argument("--configs", nargs="*", default=CONFIGS)
    args = parser.parse_args()

    for kind in ("recidivism", "income"):
        ensure_benchmark_csv(kind, args.data_dir)

    exit_code = 0
    for config_path in args.configs:
        cfg = config_from_file(config_path)
        print(f"=== {config_path} ({cfg.task} / {cfg.algorithm}) ===")
        t0 = time.perf_counter()
        report = run_experiment(cfg)
        _, txt_path = emit_report(report, cfg.output_dir)
        print(Path(txt_path).read_text(), end="")
        print(f"selected: {report.selected}")
        print(f"elapsed: {time.perf_counter() - t0:.0f}s\n")
        if report.shrink_fallback:
            exit_code = 2
    return exit_code


if __name__ == "__main__":
    sys.exit(main())
