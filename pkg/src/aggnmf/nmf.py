"""Nonnegative factor updates and the masked-gradient stopping rule.

Two update families for min ||V - W H||_F^2 over W, H >= 0: exact cyclic
column updates (HALS) and a monotone accelerated projected-gradient scheme.
Both touch one factor at a time with the other held fixed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateFactorWarning",
    "StopState",
    "init_scale",
    "init_factors",
    "update_w_hals",
    "update_h_hals",
    "update_w_nesterov",
    "update_h_nesterov",
    "largest_eigenvalue",
    "kkt_residual",
]


class DegenerateFactorWarning(UserWarning):
    """A factor column/row has zero energy, so part of an update is skipped."""


@dataclass
class StopState:
    """Squared masked-gradient norms and the objective at one iterate."""

    kkt_w: float
    kkt_h: float
    objective: float
    iteration: int = 0

    @property
    def kkt(self) -> float:
        return self.kkt_w + self.kkt_h


def init_scale(b, rank: int) -> float:
    """Initial factor magnitude sqrt(mean(b) / (rank * mean segment length)).

    Factor entries at this scale make W H match the data's per-cell average.
    Falls back to 1.0 when the data gives no usable magnitude.
    """
    vals = b.values
    if vals.size == 0:
        return 1.0
    mean_len = float(np.mean([seg.length for seg in b.scheme.segments]))
    m = float(vals.mean()) / (rank * mean_len)
    if not np.isfinite(m) or m <= 0.0:
        return 1.0
    return float(np.sqrt(m))


def init_factors(
    T: int, N: int, rank: int, scale: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Strictly positive uniform factors on (0, scale]."""
    W = (1.0 - rng.random((T, rank))) * scale
    H = (1.0 - rng.random((rank, N))) * scale
    return W, H


def _hals(W: np.ndarray, H: np.ndarray, V: np.ndarray, sweeps: int, label: str) -> np.ndarray:
    """Cyclic exact column updates of the left factor; returns a new array."""
    if sweeps < 1:
        raise ValueError(f"sweeps must be >= 1, got {sweeps}")
    W = np.array(W, dtype=float, copy=True)
    HHt = H @ H.T
    VHt = V @ H.T
    diag = np.diag(HHt)
    dead = diag == 0.0
    if dead.any():
        warnings.warn(
            f"{label} update: skipping {int(dead.sum())} zero-energy component(s)",
            DegenerateFactorWarning,
            stacklevel=3,
        )
    for _ in range(sweeps):
        for k in range(W.shape[1]):
            if dead[k]:
                continue
            w = W[:, k] + (VHt[:, k] - W @ HHt[:, k]) / diag[k]
            np.maximum(w, 0.0, out=w)
            W[:, k] = w
    return W


def update_w_hals(W: np.ndarray, H: np.ndarray, V: np.ndarray, sweeps: int = 1) -> np.ndarray:
    """One or more HALS sweeps over the columns of W."""
    return _hals(W, H, V, sweeps, "W")


def update_h_hals(W: np.ndarray, H: np.ndarray, V: np.ndarray, sweeps: int = 1) -> np.ndarray:
    """One or more HALS sweeps over the rows of H (by transposition)."""
    return _hals(H.T, W.T, V.T, sweeps, "H").T


def largest_eigenvalue(S: np.ndarray, tol: float = 1e-14, max_iter: int = 1000) -> float:
    """Top eigenvalue of a symmetric PSD matrix by power iteration."""
    S = np.asarray(S, dtype=float)
    n = S.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(max_iter):
        w = S @ v
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        v = w / norm_w
        lam_new = float(v @ (S @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new
        lam = lam_new
    return lam


def _nnls_nesterov(
    M0: np.ndarray, Gram: np.ndarray, Cross: np.ndarray, inner_iters: int, L: float
) -> np.ndarray:
    """Accelerated projected gradient for min_{M >= 0} <M, M Gram> - 2 <M, Cross>.

    Steps of size 1/L from the extrapolated point; an accepted iterate never
    increases the objective (a failed accelerated step falls back to a plain
    projected-gradient step, and a failed plain step stops the loop).
    """
    M = np.array(M0, dtype=float, copy=True)
    MG = M @ Gram
    best = float(np.sum(M * MG) - 2.0 * np.sum(M * Cross))
    Y = M
    alpha = 1.0
    for _ in range(inner_iters):
        C = np.maximum(0.0, Y - (Y @ Gram - Cross) / L)
        CG = C @ Gram
        val = float(np.sum(C * CG) - 2.0 * np.sum(C * Cross))
        if val > best:
            C = np.maximum(0.0, M - (MG - Cross) / L)
            CG = C @ Gram
            val = float(np.sum(C * CG) - 2.0 * np.sum(C * Cross))
            alpha = 1.0
            if val > best:
                break
        alpha_next = 0.5 * (1.0 + np.sqrt(4.0 * alpha * alpha + 1.0))
        Y = C + ((alpha - 1.0) / alpha_next) * (C - M)
        M, MG, best = C, CG, val
        alpha = alpha_next
    return M


def _nesterov(W: np.ndarray, H: np.ndarray, V: np.ndarray, inner_iters: int, label: str) -> np.ndarray:
    if inner_iters < 1:
        raise ValueError(f"inner_iters must be >= 1, got {inner_iters}")
    HHt = H @ H.T
    L = largest_eigenvalue(HHt)
    if L <= 0.0:
        warnings.warn(
            f"{label} update: other factor has no energy, update skipped",
            DegenerateFactorWarning,
            stacklevel=3,
        )
        return np.array(W, dtype=float, copy=True)
    return _nnls_nesterov(np.asarray(W, dtype=float), HHt, V @ H.T, inner_iters, L)


def update_w_nesterov(
    W: np.ndarray, H: np.ndarray, V: np.ndarray, inner_iters: int = 20
) -> np.ndarray:
    """Accelerated projected-gradient update of W with H fixed."""
    return _nesterov(W, H, V, inner_iters, "W")


def update_h_nesterov(
    W: np.ndarray, H: np.ndarray, V: np.ndarray, inner_iters: int = 20
) -> np.ndarray:
    """Accelerated projected-gradient update of H with W fixed (by transposition)."""
    return _nesterov(H.T, W.T, V.T, inner_iters, "H").T


def kkt_residual(
    W: np.ndarray, H: np.ndarray, V: np.ndarray, iteration: int = 0, WH: np.ndarray | None = None
) -> StopState:
    """Squared norms of the gradients masked to nonzero factor entries.

    At a stationary point of the nonnegativity-constrained problem the
    gradient vanishes wherever the factor is positive, so both terms go to 0.
    """
    if WH is None:
        WH = W @ H
    R = WH - V
    kw = float(np.sum((R @ H.T) ** 2 * (W != 0.0)))
    kh = float(np.sum((W.T @ R) ** 2 * (H != 0.0)))
    return StopState(kkt_w=kw, kkt_h=kh, objective=float(np.sum(R * R)), iteration=iteration)
