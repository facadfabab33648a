"""Experiment harness: schemes x rates x methods x updates x ranks x repeats.

Each cell draws its own scheme (seeded deterministically from the base seed,
scheme kind, rate and repeat only, so every method sees the same
observations), runs all ranks, and reports one row per (method, update, rank,
repeat).  Output files are written in one canonical order so a sweep is
byte-identical across worker counts.  Wall-clock timings go to a sidecar
file to keep the main results deterministic.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import fileio
from .measurement import apply_scheme, interpolation_baseline, periodic_scheme, random_scheme
from .recovery import PenaltyConfig, RecoveryOptions, normalized_error, recover, recover_penalized

__all__ = ["ExperimentMatrix", "SweepOutput", "run_sweep"]

RESULT_COLUMNS = [
    "dataset", "scheme", "rate", "method", "update", "K", "repeat",
    "seed", "error", "converged", "min_entry", "status",
]
TIMING_COLUMNS = ["dataset", "scheme", "rate", "method", "update", "K", "repeat", "runtime"]
AGGREGATE_COLUMNS = ["dataset", "scheme", "rate", "method", "update", "best_K", "error"]


@dataclass
class ExperimentMatrix:
    """Full factorial design of the recovery benchmark."""

    schemes: tuple[str, ...] = ("periodic", "random")
    intervals: tuple[int, ...] = (2, 3, 5, 7, 10, 15, 30)
    rates: tuple[float, ...] = (0.5, 0.33, 0.2, 0.14, 0.1, 0.07, 0.03)
    methods: tuple[str, ...] = ("unpenalized", "penalized", "interpolation")
    updates: tuple[str, ...] = ("hals", "nesterov")
    ranks: tuple[int, ...] = tuple(range(2, 21))
    repeats: int = 3
    seed: int = 0
    max_outer: int = 500
    epsilon_scale: float = 1e-6
    lam: float | None = None  # None = per-dataset heuristic

    def __post_init__(self) -> None:
        for s in self.schemes:
            if s not in ("periodic", "random"):
                raise ValueError(f"unknown scheme kind {s!r}")
        for m in self.methods:
            if m not in ("unpenalized", "penalized", "interpolation"):
                raise ValueError(f"unknown method {m!r}")
        for u in self.updates:
            if u not in ("hals", "nesterov"):
                raise ValueError(f"unknown update family {u!r}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass
class _Cell:
    index: int
    scheme: str
    scheme_idx: int
    rate_idx: int
    param: float  # interval p for periodic, rate for random
    rate: float  # nominal observation rate (1/p for periodic)
    method: str
    update: str | None
    repeat: int


@dataclass
class SweepOutput:
    results_path: str
    aggregate_path: str
    timings_path: str
    manifest_path: str
    rows: list[dict] = field(repr=False)
    aggregate_rows: list[dict] = field(repr=False)


def _plain(obj):
    """Recursively turn tuples/numpy scalars into YAML-friendly types."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def _cells(config: ExperimentMatrix) -> list[_Cell]:
    cells = []
    index = 0
    for si, kind in enumerate(config.schemes):
        if kind == "periodic":
            pairs = [(float(p), 1.0 / p) for p in config.intervals]
        else:
            pairs = [(float(r), float(r)) for r in config.rates]
        for ri, (param, rate) in enumerate(pairs):
            for method in config.methods:
                updates = config.updates if method != "interpolation" else (None,)
                for update in updates:
                    for rep in range(config.repeats):
                        cells.append(
                            _Cell(index, kind, si, ri, param, rate, method, update, rep)
                        )
                        index += 1
    return cells


def _run_cell(args) -> tuple[int, list[dict], list[dict]]:
    cell, V_star, rho, config, dataset = args
    T, N = V_star.shape
    scheme_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, cell.scheme_idx, cell.rate_idx, cell.repeat])
    )
    if cell.scheme == "periodic":
        scheme = periodic_scheme(T, N, int(cell.param), scheme_rng)
    else:
        scheme = random_scheme(T, N, cell.param, scheme_rng)
    b = apply_scheme(scheme, V_star)

    base = dict(dataset=dataset, scheme=cell.scheme, rate=fileio.fmt_float(cell.rate),
                method=cell.method, repeat=cell.repeat)
    rows: list[dict] = []
    timings: list[dict] = []

    if cell.method == "interpolation":
        t0 = time.perf_counter()
        V_hat = interpolation_baseline(b)
        err = normalized_error(V_hat, V_star)
        dt = time.perf_counter() - t0
        rows.append(dict(base, update="", K="", seed="",
                         error=fileio.fmt_float(err), converged="",
                         min_entry=fileio.fmt_float(float(V_hat.min())), status="ok"))
        timings.append(dict(base, update="", K="", runtime=f"{dt:.6f}"))
        return cell.index, rows, timings

    penalty = PenaltyConfig(rho=rho, lam=config.lam) if cell.method == "penalized" else None
    for K in config.ranks:
        run_seed = int(
            np.random.SeedSequence(
                [config.seed, cell.scheme_idx, cell.rate_idx, cell.repeat, int(K)]
            ).generate_state(1)[0]
        )
        opts = RecoveryOptions(
            rank=int(K), update=cell.update, seed=run_seed,
            max_outer=config.max_outer, epsilon_scale=config.epsilon_scale,
            penalty=penalty,
        )
        t0 = time.perf_counter()
        try:
            report = recover_penalized(b, opts) if penalty is not None else recover(b, opts)
            err = normalized_error(report.V, V_star)
            rows.append(dict(base, update=cell.update, K=int(K), seed=run_seed,
                             error=fileio.fmt_float(err),
                             converged=str(bool(report.converged)).lower(),
                             min_entry=fileio.fmt_float(float(report.V.min())), status="ok"))
        except Exception as exc:  # partial failure: keep the row, keep going
            rows.append(dict(base, update=cell.update, K=int(K), seed=run_seed,
                             error="", converged="false", min_entry="",
                             status=f"failed: {type(exc).__name__}"))
        timings.append(dict(base, update=cell.update, K=int(K),
                            runtime=f"{time.perf_counter() - t0:.6f}"))
    return cell.index, rows, timings


def _aggregate(rows: list[dict]) -> list[dict]:
    """Mean best-rank error per (scheme, rate, method, update).

    NMF methods: mean error per rank over repeats, then the best (lowest)
    rank, ties to the smallest rank.  Interpolation: plain mean over repeats.
    """
    groups: dict[tuple, list[dict]] = {}
    order: list[tuple] = []
    for row in rows:
        key = (row["dataset"], row["scheme"], row["rate"], row["method"], row["update"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(row)
    out = []
    for key in order:
        dataset, scheme, rate, method, update = key
        rows_k = [r for r in groups[key] if r["status"] == "ok"]
        if not rows_k:
            out.append(dict(dataset=dataset, scheme=scheme, rate=rate, method=method,
                            update=update, best_K="", error=""))
            continue
        if method == "interpolation":
            err = float(np.mean([float(r["error"]) for r in rows_k]))
            out.append(dict(dataset=dataset, scheme=scheme, rate=rate, method=method,
                            update=update, best_K="", error=fileio.fmt_float(err)))
            continue
        by_rank: dict[int, list[float]] = {}
        for r in rows_k:
            by_rank.setdefault(int(r["K"]), []).append(float(r["error"]))
        means = sorted((float(np.mean(v)), K) for K, v in by_rank.items())
        best_err, best_K = means[0]
        out.append(dict(dataset=dataset, scheme=scheme, rate=rate, method=method,
                        update=update, best_K=best_K, error=fileio.fmt_float(best_err)))
    return out


def run_sweep(
    V_star: np.ndarray,
    rho: np.ndarray | None,
    config: ExperimentMatrix,
    out_dir: str,
    dataset: str = "synthetic",
    jobs: int = 1,
) -> SweepOutput:
    """Run the full experiment matrix against a ground-truth matrix.

    ``rho`` is required when the matrix includes the penalized method.
    """
    V_star = np.asarray(V_star, dtype=float)
    if V_star.ndim != 2:
        raise ValueError("ground truth must be a matrix")
    if "penalized" in config.methods:
        if rho is None:
            raise ValueError("the penalized method requires per-column rho values")
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (V_star.shape[1],):
            raise ValueError(f"need one rho per column, got shape {rho.shape}")
    os.makedirs(out_dir, exist_ok=True)
    t_start = time.perf_counter()

    cells = _cells(config)
    payloads = [(cell, V_star, rho, config, dataset) for cell in cells]
    results: dict[int, tuple[list[dict], list[dict]]] = {}
    if jobs <= 1:
        for payload in payloads:
            idx, rows, timings = _run_cell(payload)
            results[idx] = (rows, timings)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for idx, rows, timings in pool.map(_run_cell, payloads, chunksize=1):
                results[idx] = (rows, timings)

    all_rows: list[dict] = []
    all_timings: list[dict] = []
    for idx in sorted(results):
        rows, timings = results[idx]
        all_rows.extend(rows)
        all_timings.extend(timings)

    aggregate_rows = _aggregate(all_rows)

    results_path = os.path.join(out_dir, "results.csv")
    aggregate_path = os.path.join(out_dir, "aggregated.csv")
    timings_path = os.path.join(out_dir, "timings.csv")
    manifest_path = os.path.join(out_dir, "manifest.yaml")
    fileio.write_csv(results_path, RESULT_COLUMNS,
                     ([row[c] for c in RESULT_COLUMNS] for row in all_rows))
    fileio.write_csv(aggregate_path, AGGREGATE_COLUMNS,
                     ([row[c] for c in AGGREGATE_COLUMNS] for row in aggregate_rows))
    fileio.write_csv(timings_path, TIMING_COLUMNS,
                     ([row[c] for c in TIMING_COLUMNS] for row in all_timings))
    manifest = {
        "dataset": dataset,
        "shape": {"T": int(V_star.shape[0]), "N": int(V_star.shape[1])},
        "config": _plain(asdict(config)),
        "jobs": int(jobs),
        "rows": len(all_rows),
        "total_runtime_seconds": round(time.perf_counter() - t_start, 3),
    }
    fileio.save_manifest(manifest_path, manifest)
    return SweepOutput(
        results_path=results_path,
        aggregate_path=aggregate_path,
        timings_path=timings_path,
        manifest_path=manifest_path,
        rows=all_rows,
        aggregate_rows=aggregate_rows,
    )
