#!/usr/bin/env python3
"""Run a reduced benchmark (ranks 5/10/20, the two sparsest rates) that
finishes in a couple of minutes.  Same output files as the full sweep.

Usage: python3 scripts/run_smoke_sweep.py [--out-dir results/smoke] [--seed 0] [--jobs 1]
"""

import argparse
import sys

from aggnmf import cli


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="results/smoke")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    return cli.main(
        [
            "sweep",
            "--periods", "150",
            "--series", "120",
            "--rank", "20",
            "--ranks", "5,10,20",
            "--intervals", "10,30",
            "--rates", "0.1,0.03",
            "--seed", str(args.seed),
            "--jobs", str(args.jobs),
            "--out-dir", args.out_dir,
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
