#!/usr/bin/env python3
"""Run the full benchmark: default-scale synthetic data, every scheme/rate/
method/update/rank cell, three repeats.  Writes results.csv, aggregated.csv,
timings.csv and manifest.yaml to the output directory.

Usage: python3 scripts/run_full_sweep.py [--out-dir results/full] [--seed 0] [--jobs 1]
"""

import argparse
import sys

from aggnmf import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results/full")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    return cli.main(
        [
            "sweep",
            "--periods", "150",
            "--series", "120",
            "--rank", "20",
            "--seed", str(args.seed),
            "--jobs", str(args.jobs),
            "--out-dir", args.out_dir,
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
