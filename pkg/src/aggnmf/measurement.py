"""Temporal aggregation: segments, sampling schemes, and the measurement operator.

A measurement sums a run of consecutive periods of one series.  A scheme is a
collection of such segments, pairwise disjoint, over a T x N matrix whose rows
are periods and whose columns are series.  Applying a scheme to a matrix
yields the observation vector b, one entry per segment, in segment order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Segment",
    "AggregationScheme",
    "ObservationVector",
    "apply_scheme",
    "periodic_scheme",
    "random_scheme",
    "interpolation_baseline",
]


@dataclass(frozen=True)
class Segment:
    """A run of ``length`` consecutive rows of one column, summed into one value."""

    column: int
    start: int  # 0-based row index of the first covered period
    length: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"segment length must be >= 1, got {self.length}")
        if self.column < 0:
            raise ValueError(f"segment column must be >= 0, got {self.column}")
        if self.start < 0:
            raise ValueError(f"segment start must be >= 0, got {self.start}")


@dataclass
class AggregationScheme:
    """A disjoint collection of segments over a T x N matrix.

    Precomputes, per segment length, the flat (row-major) indices of every
    covered cell so that applying the scheme and projecting onto it are pure
    vectorized gathers and scatters.
    """

    T: int
    N: int
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if self.T < 1 or self.N < 1:
            raise ValueError(f"matrix shape must be positive, got ({self.T}, {self.N})")
        self.segments = tuple(self.segments)
        columns = np.array([s.column for s in self.segments], dtype=np.intp)
        starts = np.array([s.start for s in self.segments], dtype=np.intp)
        lengths = np.array([s.length for s in self.segments], dtype=np.intp)
        if len(self.segments):
            if columns.max() >= self.N:
                raise ValueError("segment column out of range")
            if (starts + lengths).max() > self.T:
                raise ValueError("segment extends past the last period")

        # group segments by length; each group is (segment ids, flat cell indices)
        self._groups: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        covered = np.zeros(self.T * self.N, dtype=bool)
        for h in np.unique(lengths) if len(self.segments) else []:
            ids = np.flatnonzero(lengths == h)
            rows = starts[ids][:, None] + np.arange(h)[None, :]
            idx = rows * self.N + columns[ids][:, None]
            flat = idx.ravel()
            if covered[flat].any():
                raise ValueError("segments overlap")
            covered[flat] = True
            self._groups[int(h)] = (ids, idx)
        if len(self.segments) and covered.sum() != lengths.sum():
            raise ValueError("segments overlap")
        self._covered = covered.reshape(self.T, self.N)

        # per-column segment ids, in segment order
        per_col: list[list[int]] = [[] for _ in range(self.N)]
        for d, seg in enumerate(self.segments):
            per_col[seg.column].append(d)
        self._column_ids = [np.array(ids, dtype=np.intp) for ids in per_col]

    @property
    def D(self) -> int:
        return len(self.segments)

    def coverage_fraction(self) -> float:
        return float(self._covered.mean())

    def covered_mask(self) -> np.ndarray:
        """Boolean (T, N) mask of cells covered by some segment."""
        return self._covered.copy()

    def column_segments(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(segment ids, starts, lengths) of column ``n``, in segment order."""
        ids = self._column_ids[n]
        starts = np.array([self.segments[d].start for d in ids], dtype=np.intp)
        lengths = np.array([self.segments[d].length for d in ids], dtype=np.intp)
        return ids, starts, lengths


@dataclass
class ObservationVector:
    """Aggregate values, one per segment of ``scheme``, in segment order."""

    values: np.ndarray
    scheme: AggregationScheme

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.scheme.D,):
            raise ValueError(
                f"expected {self.scheme.D} observations, got shape {self.values.shape}"
            )


def apply_scheme(scheme: AggregationScheme, X: np.ndarray) -> ObservationVector:
    """Sum each segment of ``X``; returns the observation vector."""
    X = np.asarray(X, dtype=float)
    if X.shape != (scheme.T, scheme.N):
        raise ValueError(f"matrix shape {X.shape} does not match scheme ({scheme.T}, {scheme.N})")
    flat = np.ascontiguousarray(X).ravel()
    b = np.empty(scheme.D)
    for _, (ids, idx) in scheme._groups.items():
        b[ids] = flat[idx].sum(axis=1)
    return ObservationVector(values=b, scheme=scheme)


def _column_run(n: int, observed: np.ndarray) -> list[Segment]:
    """Segments of one column given its sorted 1-based observation periods.

    Each observation at period t covers all periods since the previous
    observation (exclusive) up to t (inclusive).  Periods after the last
    observation stay uncovered.
    """
    out = []
    prev = 0
    for t in observed:
        t = int(t)
        out.append(Segment(column=n, start=prev, length=t - prev))
        prev = t
    return out


def periodic_scheme(
    T: int,
    N: int,
    p: int,
    rng: np.random.Generator,
    offsets: np.ndarray | None = None,
) -> AggregationScheme:
    """Every column is observed every ``p`` periods at a random phase.

    Column n draws an offset o in {1, ..., p} and is observed at periods
    o, o + p, o + 2p, ... (1-based, up to T).  ``offsets`` overrides the
    draw, mainly for tests.
    """
    if not 1 <= p <= T:
        raise ValueError(f"interval must be in [1, {T}], got {p}")
    if offsets is None:
        offsets = rng.integers(1, p + 1, size=N)
    else:
        offsets = np.asarray(offsets, dtype=int)
        if offsets.shape != (N,) or offsets.min() < 1 or offsets.max() > p:
            raise ValueError("offsets must be N values in [1, p]")
    segments: list[Segment] = []
    for n in range(N):
        observed = np.arange(offsets[n], T + 1, p)
        segments.extend(_column_run(n, observed))
    return AggregationScheme(T, N, tuple(segments))


def random_scheme(T: int, N: int, rate: float, rng: np.random.Generator) -> AggregationScheme:
    """Every column is observed at floor(T * rate + 1/2) random periods (>= 1)."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    m = int(np.floor(T * rate + 0.5))
    m = max(1, min(m, T))
    segments: list[Segment] = []
    for n in range(N):
        observed = np.sort(rng.choice(T, size=m, replace=False)) + 1
        segments.extend(_column_run(n, observed))
    return AggregationScheme(T, N, tuple(segments))


def interpolation_baseline(b: ObservationVector) -> np.ndarray:
    """Spread each aggregate evenly over its covered periods; uncovered cells are 0."""
    scheme = b.scheme
    out = np.zeros(scheme.T * scheme.N)
    for h, (ids, idx) in scheme._groups.items():
        out[idx] = (b.values[ids] / h)[:, None]
    return out.reshape(scheme.T, scheme.N)
