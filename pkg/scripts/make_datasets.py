#!/usr/bin/env python3
"""Write the synthetic benchmark-replica CSVs into a data directory.

The generated files reproduce the shape and group structure of the public
recidivism and census-income fairness benchmarks so the experiment configs
run end to end.  If you have the real files, convert them to CSVs with the
schema documented in the configs and drop them in the same directory.
"""

import argparse
from pathlib import Path

from rategames.synth import BENCHMARK_FILES, ensure_benchmark_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data-dir", default="data", help="output directory")
    parser.add_argument("--force", action="store_true", help="rewrite existing files")
    args = parser.parse_args()
    data_dir = Path(args.data_dir)
    for kind, (filename, maker, _schema) in BENCHMARK_FILES.items():
        path = data_dir / filename
        if args.force and path.exists():
            path.unlink()
        path = ensure_benchmark_csv(kind, data_dir)
        print(f"{kind}: {path}")


if __name__ == "__main__":
    main()
