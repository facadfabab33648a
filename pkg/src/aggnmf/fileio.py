"""CSV and YAML readers/writers for matrices, schemes, observations and traces.

All floats are written with 17 significant digits so files re-parse to
bit-identical values.  Row/column/segment ids are 1-based in files and
0-based in memory.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np
import yaml

from .measurement import AggregationScheme, ObservationVector, Segment
from .recovery import RecoveryReport

__all__ = [
    "fmt_float",
    "save_matrix",
    "load_matrix",
    "save_scheme",
    "load_scheme",
    "save_observations",
    "load_observations",
    "save_rho",
    "load_rho",
    "save_trace",
    "save_manifest",
    "load_manifest",
    "write_csv",
]


def fmt_float(v: float) -> str:
    """Format a float as its shortest lossless round-trip decimal."""
    return repr(float(v))


def save_matrix(path: str, X: np.ndarray) -> None:
    """Write a T x N matrix as CSV with a header of 1-based column ids."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    header = ",".join(str(n + 1) for n in range(X.shape[1]))
    np.savetxt(path, X, fmt="%.17g", delimiter=",", header=header, comments="")


def load_matrix(path: str) -> np.ndarray:
    X = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return np.asarray(X, dtype=float)


def save_scheme(path: str, scheme: AggregationScheme) -> None:
    """Write segments as CSV (1-based), with the matrix shape on a comment line."""
    lines = [f"# T={scheme.T} N={scheme.N}", "column,start,length"]
    for seg in scheme.segments:
        lines.append(f"{seg.column + 1},{seg.start + 1},{seg.length}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_scheme(path: str, T: int | None = None, N: int | None = None) -> AggregationScheme:
    """Read a segment CSV; the shape comes from the comment line unless given."""
    segments: list[Segment] = []
    with open(path) as f:
        for raw in f:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].replace(",", " ").split():
                    if token.startswith("T=") and T is None:
                        T = int(token[2:])
                    elif token.startswith("N=") and N is None:
                        N = int(token[2:])
                continue
            if line.lower().startswith("column"):
                continue
            col, start, length = (int(tok) for tok in line.split(","))
            segments.append(Segment(column=col - 1, start=start - 1, length=length))
    if T is None or N is None:
        raise ValueError(
            f"{path}: matrix shape unknown; add a '# T=<periods> N=<series>' line "
            "or pass the shape explicitly"
        )
    return AggregationScheme(T=T, N=N, segments=tuple(segments))


def save_observations(path: str, b: ObservationVector) -> None:
    lines = ["segment_id,value"]
    for d, v in enumerate(b.values):
        lines.append(f"{d + 1},{fmt_float(v)}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_observations(path: str, scheme: AggregationScheme) -> ObservationVector:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != scheme.D:
        raise ValueError(f"{path}: expected {scheme.D} observations, found {data.shape[0]}")
    values = np.empty(scheme.D)
    ids = data[:, 0].astype(int) - 1
    if sorted(ids.tolist()) != list(range(scheme.D)):
        raise ValueError(f"{path}: segment ids must be 1..{scheme.D} exactly once each")
    values[ids] = data[:, 1]
    return ObservationVector(values=values, scheme=scheme)


def save_rho(path: str, rho: np.ndarray) -> None:
    lines = ["column,rho"]
    for n, r in enumerate(np.asarray(rho, dtype=float)):
        lines.append(f"{n + 1},{fmt_float(r)}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_rho(path: str, N: int) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] != N:
        raise ValueError(f"{path}: expected {N} rows, found {data.shape[0]}")
    ids = data[:, 0].astype(int) - 1
    if sorted(ids.tolist()) != list(range(N)):
        raise ValueError(f"{path}: column ids must be 1..{N} exactly once each")
    rho = np.empty(N)
    rho[ids] = data[:, 1]
    return rho


def save_trace(path: str, report: RecoveryReport) -> None:
    lines = ["iter,objective,penalized_objective,kkt,constraint_violation,min_entry"]
    for rec in report.trace:
        lines.append(
            ",".join(
                [
                    str(rec.iteration),
                    fmt_float(rec.objective),
                    fmt_float(rec.penalized_objective),
                    fmt_float(rec.kkt),
                    fmt_float(rec.constraint_violation),
                    fmt_float(rec.min_entry),
                ]
            )
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def save_manifest(path: str, data: dict) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(data, f, sort_keys=True)


def load_manifest(path: str) -> dict:
    with open(path) as f:
        return yaml.safe_load(f)


def write_csv(path: str, header: list[str], rows: Iterable[Iterable]) -> None:
    """Plain CSV writer: values are used as given (pre-format floats)."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(v) for v in row) + "\n")
