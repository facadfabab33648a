"""Euclidean projections onto the data-consistency set {X >= 0 : segments sum to b}.

The set factors over segments, so the projection reduces to independent
scaled-simplex projections, one per segment, batched by segment length.
"""

from __future__ import annotations

import numpy as np

from .measurement import ObservationVector

__all__ = ["project_simplex", "project_data"]


def _project_simplex_batch(Y: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Rowwise projection of Y (m, h) onto {x >= 0, sum x = s_i}.

    Sort-based thresholding: with u the row sorted descending and
    css its cumulative sum, the active-set size is
    k = #{j : u_j > (css_j - s) / j} and the threshold is
    tau = (css_k - s) / k.  A target of 0 forces the zero vector.
    """
    m, h = Y.shape
    U = -np.sort(-Y, axis=1)
    css = np.cumsum(U, axis=1)
    j = np.arange(1, h + 1)
    tau = (css - s[:, None]) / j
    k = np.count_nonzero(U > tau, axis=1)  # valid sizes form a prefix, so count = last
    rows = np.arange(m)
    tau_k = tau[rows, np.maximum(k, 1) - 1]
    tau_k = np.where(k > 0, tau_k, np.inf)  # k == 0 only when s == 0
    return np.maximum(Y - tau_k[:, None], 0.0)


def project_simplex(y: np.ndarray, s: float) -> np.ndarray:
    """Euclidean projection of ``y`` onto {x >= 0, sum x = s}, s >= 0."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("input must be a nonempty vector")
    if not np.isfinite(y).all():
        raise ValueError("input vector must be finite")
    if not np.isfinite(s) or s < 0:
        raise ValueError(f"sum target must be finite and >= 0, got {s}")
    return _project_simplex_batch(y[None, :], np.array([float(s)]))[0]


def project_data(X: np.ndarray, b: ObservationVector) -> np.ndarray:
    """Project ``X`` entrywise-nearest onto {V >= 0 : segment sums of V equal b}.

    Covered cells are replaced segment by segment with simplex projections;
    uncovered cells are clipped at zero.
    """
    scheme = b.scheme
    X = np.asarray(X, dtype=float)
    if X.shape != (scheme.T, scheme.N):
        raise ValueError(f"matrix shape {X.shape} does not match scheme ({scheme.T}, {scheme.N})")
    vals = b.values
    bad = ~np.isfinite(vals) | (vals < 0)
    if bad.any():
        d = int(np.flatnonzero(bad)[0])
        raise ValueError(f"segment {d + 1}: sum target must be finite and >= 0, got {vals[d]}")

    out = np.maximum(X, 0.0)
    flat_in = np.ascontiguousarray(X).ravel()
    flat_out = out.ravel()
    for _, (ids, idx) in scheme._groups.items():
        block = flat_in[idx]
        finite = np.isfinite(block)
        if not finite.all():
            d = int(ids[np.flatnonzero(~finite.all(axis=1))[0]])
            raise ValueError(f"segment {d + 1}: input vector must be finite")
        flat_out[idx] = _project_simplex_batch(block, vals[ids])
    return flat_out.reshape(scheme.T, scheme.N)
