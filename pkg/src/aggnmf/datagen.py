"""Synthetic nonnegative series: mixtures of shifted Matern Gaussian-process paths.

Ground truth is V* = W H with each column of W a GP path shifted up by its own
minimum and H uniform on (0, 1).  A 2T-length draw is split into a history
half (for estimating per-column autocorrelation thresholds) and a recovery
half (the matrix to reconstruct), sharing the same mixing weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "GenerationError",
    "SyntheticSpec",
    "matern_kernel",
    "matern_mixture",
    "synthesize_with_history",
    "estimate_rho",
]


class GenerationError(RuntimeError):
    """Synthetic data could not be generated (covariance not factorizable)."""


@dataclass
class SyntheticSpec:
    T: int = 150
    N: int = 120
    rank: int = 20
    nu: float = 2.5
    length_scale: float = 10.0
    variance: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.T < 1 or self.N < 1 or self.rank < 1:
            raise ValueError("T, N and rank must be positive")
        if self.nu <= 0 or self.length_scale <= 0 or self.variance <= 0:
            raise ValueError("nu, length_scale and variance must be positive")


def matern_kernel(r: np.ndarray, nu: float = 2.5, length_scale: float = 10.0, variance: float = 1.0) -> np.ndarray:
    """Matern covariance of distances ``r``; closed forms at nu in {1/2, 3/2, 5/2}."""
    r = np.asarray(r, dtype=float)
    x = np.sqrt(2.0 * nu) * r / length_scale
    if nu == 0.5:
        k = np.exp(-x)
    elif nu == 1.5:
        k = (1.0 + x) * np.exp(-x)
    elif nu == 2.5:
        k = (1.0 + x + x * x / 3.0) * np.exp(-x)
    else:
        from scipy.special import gamma, kv

        k = np.ones_like(x)
        pos = x > 0
        xp = x[pos]
        k[pos] = (2.0 ** (1.0 - nu) / gamma(nu)) * xp**nu * kv(nu, xp)
    return variance * k


def _cholesky_with_jitter(K: np.ndarray, jitter: float = 1e-10, escalations: int = 3) -> np.ndarray:
    eye = np.eye(len(K))
    for i in range(escalations + 1):
        try:
            return np.linalg.cholesky(K + (jitter * 10.0**i) * eye)
        except np.linalg.LinAlgError:
            continue
    raise GenerationError(
        f"covariance is not factorizable even with jitter {jitter * 10.0**escalations}"
    )


def matern_mixture(
    spec: SyntheticSpec, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw (V*, W, H): rank GP paths, each shifted to start at 0, mixed by uniform weights."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    t = np.arange(spec.T, dtype=float)
    K = matern_kernel(np.abs(t[:, None] - t[None, :]), spec.nu, spec.length_scale, spec.variance)
    L = _cholesky_with_jitter(K)
    paths = L @ rng.standard_normal((spec.T, spec.rank))
    W = paths - paths.min(axis=0, keepdims=True)
    H = rng.random((spec.rank, spec.N))
    return W @ H, W, H


def synthesize_with_history(
    spec: SyntheticSpec,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(history, V*, W, H): one 2T-length draw split into halves sharing H.

    The path shift uses the minimum over the full 2T window, so both halves
    are nonnegative and the second half still factors as W H.
    """
    double = replace(spec, T=2 * spec.T)
    V2, W2, H = matern_mixture(double)
    return V2[: spec.T], V2[spec.T :], W2[spec.T :], H


def estimate_rho(history: np.ndarray) -> np.ndarray:
    """Per-column lag-1 ratio sum x_{t+1} x_t / sum x_t^2, clamped to [-1, 1].

    Zero-energy columns get 0 with a warning.
    """
    X = np.asarray(history, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("history must be a matrix with at least two rows")
    num = np.sum(X[1:] * X[:-1], axis=0)
    den = np.sum(X * X, axis=0)
    zero = den == 0.0
    if zero.any():
        warnings.warn(
            f"{int(zero.sum())} zero-energy column(s): threshold set to 0", UserWarning
        )
    rho = np.divide(num, den, out=np.zeros_like(num), where=~zero)
    return np.clip(rho, -1.0, 1.0)
