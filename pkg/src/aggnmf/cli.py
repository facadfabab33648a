"""Command-line interface.

Subcommands: simulate (synthetic dataset), sample (draw a scheme and
aggregate a matrix), recover (reconstruct from scheme + observations),
evaluate (compare two matrices), sweep (the full experiment matrix).

Exit codes: 0 success, 2 bad flags/config, 3 bad input data, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import asdict

import numpy as np

from . import fileio
from .autocorr import NumericalError
from .datagen import GenerationError, SyntheticSpec, estimate_rho, synthesize_with_history
from .measurement import ObservationVector, apply_scheme, periodic_scheme, random_scheme
from .recovery import (
    PenaltyConfig,
    RecoveryOptions,
    normalized_error,
    recover,
    recover_penalized,
)
from .sweep import ExperimentMatrix, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    """Inconsistent or out-of-range options (exit code 2)."""


class DataError(Exception):
    """Unreadable or inconsistent input files (exit code 3)."""


def _load(loader, *args, **kwargs):
    """Run a file loader, converting failures into DataError."""
    try:
        return loader(*args, **kwargs)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc


def _parse_ranks(text: str) -> tuple[int, ...]:
    """Parse '2-20' and/or '5,10,20' style rank lists."""
    ranks: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:  # allow a leading minus to fail int() below
            lo, hi = part.split("-", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ConfigError(f"empty rank range {part!r}")
            ranks.extend(range(lo_i, hi_i + 1))
        else:
            ranks.append(int(part))
    if not ranks:
        raise ConfigError(f"no ranks in {text!r}")
    if any(k < 1 for k in ranks):
        raise ConfigError("ranks must be >= 1")
    return tuple(dict.fromkeys(ranks))  # dedupe, keep order


def _parse_lambda(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        lam = float(text)
    except ValueError as exc:
        raise ConfigError(f"--lambda must be 'auto' or a number, got {text!r}") from exc
    if not np.isfinite(lam) or lam < 0:
        raise ConfigError(f"--lambda must be finite and >= 0, got {lam}")
    return lam


def cmd_simulate(args) -> int:
    if args.periods < 1 or args.series < 1 or args.rank < 1:
        raise ConfigError("--periods, --series and --rank must be positive")
    try:
        spec = SyntheticSpec(
            T=args.periods, N=args.series, rank=args.rank,
            nu=args.nu, length_scale=args.length_scale, seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    history, V_star, _, _ = synthesize_with_history(spec)
    rho = estimate_rho(history)
    os.makedirs(args.out_dir, exist_ok=True)
    fileio.save_matrix(os.path.join(args.out_dir, "ground_truth.csv"), V_star)
    fileio.save_matrix(os.path.join(args.out_dir, "history.csv"), history)
    fileio.save_rho(os.path.join(args.out_dir, "rho.csv"), rho)
    fileio.save_manifest(
        os.path.join(args.out_dir, "manifest.yaml"),
        {"command": "simulate", "spec": asdict(spec),
         "outputs": ["ground_truth.csv", "history.csv", "rho.csv"]},
    )
    print(f"wrote ground_truth.csv, history.csv, rho.csv to {args.out_dir}")
    return EXIT_OK


def cmd_sample(args) -> int:
    X = _load(fileio.load_matrix, args.matrix)
    T, N = X.shape
    rng = np.random.default_rng(args.seed)
    if args.scheme == "periodic":
        if args.interval is None:
            raise ConfigError("--scheme periodic requires --interval")
        if not 1 <= args.interval <= T:
            raise ConfigError(f"--interval must be in [1, {T}], got {args.interval}")
        scheme = periodic_scheme(T, N, args.interval, rng)
    else:
        if args.rate is None:
            raise ConfigError("--scheme random requires --rate")
        if not 0 < args.rate <= 1:
            raise ConfigError(f"--rate must be in (0, 1], got {args.rate}")
        scheme = random_scheme(T, N, args.rate, rng)
    b = apply_scheme(scheme, X)
    os.makedirs(args.out_dir, exist_ok=True)
    fileio.save_scheme(os.path.join(args.out_dir, "scheme.csv"), scheme)
    fileio.save_observations(os.path.join(args.out_dir, "observations.csv"), b)
    fileio.save_manifest(
        os.path.join(args.out_dir, "manifest.yaml"),
        {"command": "sample", "matrix": args.matrix, "scheme": args.scheme,
         "interval": args.interval, "rate": args.rate, "seed": args.seed,
         "segments": scheme.D, "coverage_fraction": scheme.coverage_fraction()},
    )
    print(f"{scheme.D} segments, coverage {scheme.coverage_fraction():.4f}")
    return EXIT_OK


def cmd_recover(args) -> int:
    if args.rank < 1:
        raise ConfigError("--rank must be >= 1")
    scheme = _load(fileio.load_scheme, args.scheme, T=args.periods, N=args.series)
    b = _load(fileio.load_observations, args.observations, scheme)
    penalty = None
    if args.penalized:
        if args.rho_file is None:
            raise ConfigError("--penalized requires --rho-file")
        rho = _load(fileio.load_rho, args.rho_file, scheme.N)
        penalty = PenaltyConfig(rho=rho, lam=_parse_lambda(args.lam))
    opts = RecoveryOptions(
        rank=args.rank, update=args.update, epsilon_scale=args.epsilon_scale,
        max_outer=args.max_iters, seed=args.seed, penalty=penalty,
        dense_projectors=not args.lean_projectors,
    )
    try:
        report = recover_penalized(b, opts) if penalty is not None else recover(b, opts)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    os.makedirs(args.out_dir, exist_ok=True)
    V_out = np.maximum(report.V, 0.0)  # clip for export; the raw V satisfies the sums
    negatives = int((report.V < 0).sum())
    fileio.save_matrix(os.path.join(args.out_dir, "recovered.csv"), V_out)
    fileio.save_trace(os.path.join(args.out_dir, "trace.csv"), report)
    manifest = {
        "command": "recover",
        "scheme": args.scheme, "observations": args.observations,
        "rank": args.rank, "update": args.update,
        "penalized": bool(args.penalized), "lambda": report.lam,
        "seed": args.seed, "max_iters": args.max_iters,
        "epsilon_scale": args.epsilon_scale,
        "iterations": report.iterations, "converged": bool(report.converged),
        "stopped_by": report.stopped_by, "epsilon": report.epsilon,
        "final_objective": report.trace[-1].objective,
        "final_kkt": report.trace[-1].kkt,
        "min_entry": float(report.V.min()),
        "clipped_negative_entries": negatives,
        "wall_time_seconds": round(report.wall_time, 3),
    }
    if args.ground_truth is not None:
        V_star = _load(fileio.load_matrix, args.ground_truth)
        try:
            manifest["normalized_error"] = normalized_error(report.V, V_star)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    fileio.save_manifest(os.path.join(args.out_dir, "manifest.yaml"), manifest)
    print(
        f"rank {args.rank} ({args.update}{', penalized' if args.penalized else ''}): "
        f"{report.iterations} iterations, converged={report.converged}, "
        f"min entry {report.V.min():.3g}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    V = _load(fileio.load_matrix, args.recovered)
    V_star = _load(fileio.load_matrix, args.ground_truth)
    try:
        err = normalized_error(V, V_star)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    print(f"normalized_error: {fileio.fmt_float(err)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    methods = tuple(args.methods.split(","))
    updates = tuple(args.updates.split(","))
    try:
        config = ExperimentMatrix(
            schemes=tuple(args.schemes.split(",")),
            intervals=tuple(int(p) for p in args.intervals.split(",")),
            rates=tuple(float(r) for r in args.rates.split(",")),
            methods=methods,
            updates=updates,
            ranks=_parse_ranks(args.ranks),
            repeats=args.repeats,
            seed=args.seed,
            max_outer=args.max_iters,
            epsilon_scale=args.epsilon_scale,
            lam=_parse_lambda(args.lam),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    os.makedirs(args.out_dir, exist_ok=True)
    if args.dataset is not None:
        V_star = _load(fileio.load_matrix, args.dataset)
        dataset_label = os.path.splitext(os.path.basename(args.dataset))[0]
        rho = None
        if "penalized" in methods:
            if args.rho_file is None:
                raise ConfigError(
                    "a CSV dataset with the penalized method requires --rho-file"
                )
            rho = _load(fileio.load_rho, args.rho_file, V_star.shape[1])
    else:
        if args.periods < 1 or args.series < 1 or args.rank < 1:
            raise ConfigError("--periods, --series and --rank must be positive")
        spec = SyntheticSpec(
            T=args.periods, N=args.series, rank=args.rank, seed=args.seed,
        )
        history, V_star, _, _ = synthesize_with_history(spec)
        rho = estimate_rho(history)
        dataset_label = "synthetic"
        fileio.save_matrix(os.path.join(args.out_dir, "ground_truth.csv"), V_star)
        fileio.save_rho(os.path.join(args.out_dir, "rho.csv"), rho)

    try:
        out = run_sweep(V_star, rho, config, args.out_dir,
                        dataset=dataset_label, jobs=args.jobs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"{len(out.rows)} result rows -> {out.results_path}")
    print(f"{len(out.aggregate_rows)} aggregate rows -> {out.aggregate_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggnmf",
        description="Recover nonnegative time series from temporal aggregates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--periods", type=int, default=150)
    p.add_argument("--series", type=int, default=120)
    p.add_argument("--rank", type=int, default=20)
    p.add_argument("--nu", type=float, default=2.5)
    p.add_argument("--length-scale", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample", help="draw a scheme and aggregate a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--scheme", choices=["periodic", "random"], required=True)
    p.add_argument("--interval", type=int, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("recover", help="reconstruct a matrix from observations")
    p.add_argument("--scheme", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--update", choices=["hals", "nesterov"], default="hals")
    p.add_argument("--penalized", action="store_true")
    p.add_argument("--rho-file", default=None)
    p.add_argument("--lambda", dest="lam", default="auto",
                   help="'auto' or a nonnegative number")
    p.add_argument("--lean-projectors", action="store_true",
                   help="trade speed for memory in the penalized projection")
    p.add_argument("--periods", type=int, default=None,
                   help="override T if the scheme file lacks it")
    p.add_argument("--series", type=int, default=None,
                   help="override N if the scheme file lacks it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--epsilon-scale", type=float, default=1e-6)
    p.add_argument("--ground-truth", default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("evaluate", help="normalized error between two matrices")
    p.add_argument("--recovered", required=True)
    p.add_argument("--ground-truth", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="run the experiment matrix")
    p.add_argument("--dataset", default=None,
                   help="ground-truth matrix CSV; omit for synthetic data")
    p.add_argument("--rho-file", default=None)
    p.add_argument("--periods", type=int, default=150)
    p.add_argument("--series", type=int, default=120)
    p.add_argument("--rank", type=int, default=20,
                   help="generator rank of the synthetic dataset")
    p.add_argument("--schemes", default="periodic,random")
    p.add_argument("--intervals", default="2,3,5,7,10,15,30")
    p.add_argument("--rates", default="0.5,0.33,0.2,0.14,0.1,0.07,0.03")
    p.add_argument("--methods", default="unpenalized,penalized,interpolation")
    p.add_argument("--updates", default="hals,nesterov")
    p.add_argument("--ranks", default="2-20")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--epsilon-scale", type=float, default=1e-6)
    p.add_argument("--lambda", dest="lam", default="auto")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, GenerationError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
