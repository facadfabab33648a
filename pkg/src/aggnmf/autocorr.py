"""Lag-1 autocorrelation machinery.

The penalty quadratic form is x' D_rho x with D_rho = D + D' - 2 rho I and D
the one-step shift matrix; x' D_rho x >= 0 says the series' lag-1
autocorrelation is at least rho.  D_rho is symmetric tridiagonal with known
sine eigenvectors, which gives O(T) shifted solves, a closed-form projector
onto an affine slice per column, and an exact solver for the projection onto
the (nonconvex) constraint cone used as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solveh_banded

__all__ = [
    "NumericalError",
    "lag_matrix",
    "delta_rho_matrix",
    "delta_rho_eigenvalues",
    "top_delta_eigenvalue",
    "sine_basis",
    "autocorr_value",
    "column_autocorr_values",
    "solve_shifted",
    "lambda_heuristic",
    "ColumnProjector",
    "build_column_projector",
    "penalized_project_column",
    "ProjectorBank",
    "build_projector_bank",
    "qcqp_oracle",
]


class NumericalError(RuntimeError):
    """An iterative numeric routine failed to reach its target."""


def lag_matrix(T: int) -> np.ndarray:
    """T x T one-step shift: ones on the first superdiagonal."""
    return np.eye(T, k=1)


def delta_rho_matrix(T: int, rho: float) -> np.ndarray:
    """Dense symmetric tridiagonal form D + D' - 2 rho I."""
    D = lag_matrix(T)
    return D + D.T - 2.0 * rho * np.eye(T)


def delta_rho_eigenvalues(T: int, rho: float) -> np.ndarray:
    """Eigenvalues 2 cos(t pi / (T+1)) - 2 rho, t = 1..T, in decreasing order."""
    t = np.arange(1, T + 1)
    return 2.0 * np.cos(t * np.pi / (T + 1)) - 2.0 * rho


def top_delta_eigenvalue(T: int | np.ndarray, rho: float | np.ndarray) -> float | np.ndarray:
    """Largest eigenvalue 2 cos(pi / (T+1)) - 2 rho."""
    return 2.0 * np.cos(np.pi / (np.asarray(T) + 1.0)) - 2.0 * np.asarray(rho)


def sine_basis(T: int) -> np.ndarray:
    """Orthonormal eigenvectors of D_rho: U[t, k] ~ sin((t+1)(k+1) pi / (T+1)).

    The basis is symmetric (U = U'), with column k paired to the k-th largest
    eigenvalue, independently of rho.
    """
    t = np.arange(1, T + 1)
    return np.sqrt(2.0 / (T + 1)) * np.sin(np.outer(t, t) * np.pi / (T + 1))


def autocorr_value(x: np.ndarray, rho: float) -> float:
    """The quadratic form x' D_rho x = 2 sum x_{t+1} x_t - 2 rho sum x_t^2."""
    x = np.asarray(x, dtype=float)
    return float(2.0 * (x[1:] * x[:-1]).sum() - 2.0 * rho * (x * x).sum())


def column_autocorr_values(X: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``autocorr_value`` of every column of X against its own rho."""
    return 2.0 * np.sum(X[1:] * X[:-1], axis=0) - 2.0 * np.asarray(rho) * np.sum(X * X, axis=0)


def _check_lambda(lam: float, rho: float, T: int) -> None:
    if not np.isfinite(lam) or lam < 0.0:
        raise ValueError(f"penalty weight must be finite and >= 0, got {lam}")
    d1 = float(top_delta_eigenvalue(T, rho))
    if d1 > 0.0 and lam >= 1.0 / d1:
        raise ValueError(
            f"penalty weight {lam} is not admissible: it must stay below "
            f"1/(2 cos(pi/(T+1)) - 2 rho) = {1.0 / d1} for rho={rho}, T={T}"
        )


def solve_shifted(lam: float, rho: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (I - lam * D_rho) x = rhs with a banded Cholesky in O(T).

    ``rhs`` may be a vector or a matrix of stacked right-hand-side columns.
    Requires lam >= 0 and, when the top eigenvalue d1 of D_rho is positive,
    lam < 1/d1, so the system is positive definite.
    """
    rhs = np.asarray(rhs, dtype=float)
    T = rhs.shape[0]
    _check_lambda(lam, rho, T)
    if lam == 0.0:
        return rhs.copy()
    ab = np.empty((2, T))
    ab[0] = -lam  # superdiagonal; ab[0, 0] is unused
    ab[1] = 1.0 + 2.0 * lam * rho
    return solveh_banded(ab, rhs)


def lambda_heuristic(rho: np.ndarray, T: int) -> float:
    """Default penalty weight min(1, 1 / (2 max_n d1_n)) over applicable columns.

    Applicable means the column's top eigenvalue d1_n is positive; columns
    with d1_n <= 0 have an always-satisfied constraint and take no penalty.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    d1 = top_delta_eigenvalue(T, rho)
    applicable = d1 > 0.0
    if not applicable.any():
        raise ValueError(
            "no column has a positive top eigenvalue, so the autocorrelation "
            "penalty never binds; use a weight of 0 (unpenalized recovery)"
        )
    return float(min(1.0, 1.0 / (2.0 * float(d1[applicable].max()))))


@dataclass
class ColumnProjector:
    """Closed-form minimizer data for one column's penalized affine projection.

    Minimizes ||v - x0||^2 - lam * v' D_rho v subject to the column's segment
    sums equaling c.  With S = I - lam * D_rho (positive definite for
    admissible lam) the minimizer is Qc + M x0 where Q = S^{-1} A' (A S^{-1} A')^{-1}
    and M = (I - Q A) S^{-1}; A is the column's segment-sum operator.
    """

    column: int
    T: int
    lam: float
    rho: float
    starts: np.ndarray
    lengths: np.ndarray
    c: np.ndarray
    Qc: np.ndarray  # (T,)
    Q: np.ndarray  # (T, d)
    G: np.ndarray  # S^{-1} A', shape (T, d); equals A' when lam == 0
    gram: np.ndarray  # A S^{-1} A', shape (d, d)
    M: np.ndarray | None  # dense (T, T), or None in the memory-lean mode

    @property
    def active_dims(self) -> int:
        return int(len(self.starts))

    def apply(self, x0: np.ndarray) -> np.ndarray:
        x0 = np.asarray(x0, dtype=float)
        if self.M is not None:
            return self.Qc + self.M @ x0
        y = solve_shifted(self.lam, self.rho, x0)
        if self.active_dims == 0:
            return self.Qc + y
        return self.Qc + y - self.Q @ (self.G.T @ x0)


def build_column_projector(
    T: int,
    starts: np.ndarray,
    lengths: np.ndarray,
    c: np.ndarray,
    lam: float,
    rho: float,
    column: int = 0,
    dense: bool = True,
) -> ColumnProjector:
    """Precompute the affine projector for one column's segments.

    ``dense=True`` stores the full (T, T) map M for fast repeated application;
    ``dense=False`` keeps only the (T, d) blocks and applies via O(T) solves.
    """
    starts = np.asarray(starts, dtype=np.intp)
    lengths = np.asarray(lengths, dtype=np.intp)
    c = np.asarray(c, dtype=float)
    if not (starts.shape == lengths.shape == c.shape) or starts.ndim != 1:
        raise ValueError("starts, lengths and c must be equally sized vectors")
    _check_lambda(lam, rho, T)
    d = len(starts)
    if d == 0:
        M = solve_shifted(lam, rho, np.eye(T)) if dense else None
        return ColumnProjector(
            column=column, T=T, lam=lam, rho=rho, starts=starts, lengths=lengths,
            c=c, Qc=np.zeros(T), Q=np.zeros((T, 0)), G=np.zeros((T, 0)),
            gram=np.zeros((0, 0)), M=M,
        )
    if (lengths < 1).any() or starts.min() < 0 or (starts + lengths).max() > T:
        raise ValueError("segments out of range")

    At = np.zeros((T, d))
    for j in range(d):
        At[starts[j] : starts[j] + lengths[j], j] = 1.0
    G = solve_shifted(lam, rho, At)
    gram = At.T @ G
    try:
        cf = cho_factor(gram)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - disjoint segments keep this PD
        raise NumericalError(f"column {column}: segment normal matrix is singular") from exc
    Q = cho_solve(cf, G.T).T
    Qc = Q @ c
    M = None
    if dense:
        Sinv = solve_shifted(lam, rho, np.eye(T))
        M = Sinv - Q @ G.T
    return ColumnProjector(
        column=column, T=T, lam=lam, rho=rho, starts=starts, lengths=lengths,
        c=c, Qc=Qc, Q=Q, G=G, gram=gram, M=M,
    )


def penalized_project_column(proj: ColumnProjector, x0: np.ndarray) -> np.ndarray:
    """Apply a precomputed column projector to an anchor vector."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (proj.T,):
        raise ValueError(f"anchor shape {x0.shape} does not match T={proj.T}")
    return proj.apply(x0)


@dataclass
class ProjectorBank:
    """Both projector variants (plain lam=0 and penalized) for every column.

    In the dense mode the per-column (T, T) maps are stacked so that a whole
    matrix is projected with two batched contractions.
    """

    lam: float
    rho: np.ndarray
    applicable: np.ndarray  # d1_n > 0; others never take the penalty
    plain: list[ColumnProjector]
    penalized: list[ColumnProjector]
    M0: np.ndarray | None  # (N, T, T)
    ML: np.ndarray | None
    Qc0: np.ndarray | None  # (T, N)
    QcL: np.ndarray | None

    def apply_plain(self, X0: np.ndarray, cols: np.ndarray) -> np.ndarray:
        if self.M0 is not None:
            prod = np.matmul(self.M0[cols], X0.T[cols, :, None])[:, :, 0]
            return self.Qc0[:, cols] + prod.T
        return np.stack([self.plain[n].apply(X0[:, n]) for n in cols], axis=1)

    def apply_penalized(self, X0: np.ndarray, cols: np.ndarray) -> np.ndarray:
        if self.ML is not None:
            prod = np.matmul(self.ML[cols], X0.T[cols, :, None])[:, :, 0]
            return self.QcL[:, cols] + prod.T
        return np.stack([self.penalized[n].apply(X0[:, n]) for n in cols], axis=1)


def build_projector_bank(scheme, values: np.ndarray, rho: np.ndarray, lam: float, dense: bool = True) -> ProjectorBank:
    """Precompute plain and penalized projectors for every column of a scheme."""
    T, N = scheme.T, scheme.N
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (N,):
        raise ValueError(f"need one rho per column, got shape {rho.shape}")
    applicable = np.asarray(top_delta_eigenvalue(T, rho) > 0.0)
    plain: list[ColumnProjector] = []
    pen: list[ColumnProjector] = []
    for n in range(N):
        ids, starts, lengths = scheme.column_segments(n)
        c = values[ids]
        p0 = build_column_projector(T, starts, lengths, c, 0.0, float(rho[n]), column=n, dense=dense)
        plain.append(p0)
        if applicable[n] and lam > 0.0:
            pen.append(
                build_column_projector(T, starts, lengths, c, lam, float(rho[n]), column=n, dense=dense)
            )
        else:
            pen.append(p0)
    M0 = ML = Qc0 = QcL = None
    if dense:
        M0 = np.stack([p.M for p in plain])
        ML = np.stack([p.M for p in pen])
        Qc0 = np.stack([p.Qc for p in plain], axis=1)
        QcL = np.stack([p.Qc for p in pen], axis=1)
    return ProjectorBank(
        lam=lam, rho=rho, applicable=applicable, plain=plain, penalized=pen,
        M0=M0, ML=ML, Qc0=Qc0, QcL=QcL,
    )


def qcqp_oracle(
    x0: np.ndarray, rho: float, rng: np.random.Generator | None = None
) -> tuple[np.ndarray, float]:
    """Exact nearest point to x0 in the cone {x : x' D_rho x >= 0}.

    Returns (x, lam) where lam is the multiplier of the active constraint
    (0 when x0 is already feasible).  Requires D_rho to have a positive top
    eigenvalue; otherwise the cone is {0} and the problem degenerates.

    In the eigenbasis the stationarity system is z_t = z0_t / (1 - lam d_t)
    with lam the root of sum_t d_t z0_t^2 / (2 (1 - lam d_t)^2) on
    (0, 1/d_1).  The root is bracketed and bisected in s = 1 - lam d_1, in
    log scale, which stays accurate when the root crowds the endpoint.
    Anchor coordinates at exact eigen-nodes are jittered (1e-12 relative) to
    break ties, as the nearest point is then not unique.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size == 0:
        raise ValueError("anchor must be a nonempty vector")
    T = x0.size
    if autocorr_value(x0, rho) >= 0.0:
        return x0.copy(), 0.0
    delta = delta_rho_eigenvalues(T, rho)
    d1 = float(delta[0])
    if d1 <= 0.0:
        raise ValueError(
            "top eigenvalue is not positive: the constraint set is {0} and the "
            "projection is degenerate"
        )
    U = sine_basis(T)
    z0 = U @ x0
    scale = float(np.linalg.norm(x0))
    if np.min(np.abs(z0)) <= 1e-13 * scale:
        rng = np.random.default_rng(0) if rng is None else rng
        x0 = x0 + 1e-12 * scale * rng.standard_normal(T)
        z0 = U @ x0
    z0sq = z0 * z0
    gap = d1 - delta  # >= 0, exactly 0 at the top eigenvalue

    def phi(s: float) -> float:
        # sum_t d_t z0_t^2 / (2 (1 - lam d_t)^2) at lam = (1 - s) / d1;
        # 1 - lam d_t = (gap_t + d_t s) / d1, formed without cancellation.
        denom = (gap + delta * s) / d1
        return float(np.sum(delta * z0sq / (2.0 * denom * denom)))

    if phi(1.0) >= 0.0:
        # borderline anchor pushed feasible by the jitter
        return x0.copy(), 0.0
    s_neg = 1.0
    s_pos = None
    s = 1.0
    while s > 1e-300:
        s *= 0.5
        if phi(s) > 0.0:
            s_pos = s
            break
        s_neg = s
    if s_pos is None:
        raise NumericalError(
            f"no sign change found for the multiplier equation (T={T}, rho={rho}, "
            f"|x0|={scale}); the anchor may be numerically degenerate"
        )
    lo, hi = math.log(s_pos), math.log(s_neg)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(math.exp(mid)) > 0.0:
            lo = mid
        else:
            hi = mid
    s = math.exp(0.5 * (lo + hi))
    lam = (1.0 - s) / d1
    z = z0 / ((gap + delta * s) / d1)
    return U.T @ z, float(lam)
