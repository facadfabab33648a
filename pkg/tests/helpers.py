"""Shared reference implementations (independent oracles) for the tests.

Everything here is deliberately naive: dense matrices, explicit loops and
generic solvers, so the fast implementations in the package are checked
against code with no shared logic.
"""

from __future__ import annotations

import numpy as np

from aggnmf import AggregationScheme, Segment, autocorr_value, delta_rho_matrix


def simplex_reference(y: np.ndarray, s: float) -> np.ndarray:
    """O(h^2) sort-and-threshold projection onto {x >= 0, sum x = s}."""
    y = np.asarray(y, dtype=float)
    if s == 0.0:
        return np.zeros_like(y)
    u = np.sort(y)[::-1]
    best_k = 0
    tau = 0.0
    for k in range(1, y.size + 1):
        top = float(sum(u[:k]))  # deliberate O(k) re-summation
        t = (top - s) / k
        if u[k - 1] > t:
            best_k = k
            tau = t
    if best_k == 0:
        return np.zeros_like(y)
    return np.maximum(y - tau, 0.0)


def build_dense_operator(T: int, starts, lengths) -> np.ndarray:
    """Rows of 0/1 indicators, one per segment of a single column."""
    starts = np.asarray(starts, dtype=int)
    lengths = np.asarray(lengths, dtype=int)
    A = np.zeros((starts.size, T))
    for i, (t0, h) in enumerate(zip(starts, lengths)):
        A[i, t0 : t0 + h] = 1.0
    return A


def dense_affine_projection(T: int, starts, lengths, c, x0) -> np.ndarray:
    """Euclidean projection onto {x : A x = c} via the normal equations."""
    A = build_dense_operator(T, starts, lengths)
    c = np.asarray(c, dtype=float)
    gram = A @ A.T
    return x0 + A.T @ np.linalg.solve(gram, c - A @ x0)


def saddle_point_projection(T: int, starts, lengths, c, x0, lam: float, rho: float) -> np.ndarray:
    """Penalized affine projection via the dense KKT system.

    Solves [[I - lam*D_rho, A'], [A, 0]] (x, mult) = (x0, c) with a generic
    dense solver and returns x.
    """
    A = build_dense_operator(T, starts, lengths)
    d = A.shape[0]
    S = np.eye(T) - lam * delta_rho_matrix(T, rho)
    K = np.zeros((T + d, T + d))
    K[:T, :T] = S
    K[:T, T:] = A.T
    K[T:, :T] = A
    rhs = np.concatenate([np.asarray(x0, dtype=float), np.asarray(c, dtype=float)])
    return np.linalg.solve(K, rhs)[:T]


def random_disjoint_segments(rng: np.random.Generator, T: int, max_segments: int):
    """Random disjoint consecutive-row runs inside one column of length T."""
    n_obs = int(rng.integers(1, max_segments + 1))
    points = np.sort(rng.choice(np.arange(1, T + 1), size=min(n_obs, T), replace=False))
    starts, lengths = [], []
    prev = 0
    for p in points:
        starts.append(prev)
        lengths.append(int(p - prev))
        prev = int(p)
    return np.array(starts), np.array(lengths)


def scheme_from_columns(T: int, N: int, per_column) -> AggregationScheme:
    """Build a scheme from {column: (starts, lengths)} pairs."""
    segs = []
    for n, (starts, lengths) in per_column.items():
        for t0, h in zip(starts, lengths):
            segs.append(Segment(column=int(n), start=int(t0), length=int(h)))
    return AggregationScheme(T=T, N=N, segments=segs)


def feasible_autocorr_samples(
    rng: np.random.Generator, x0: np.ndarray, rho: float, count: int
) -> np.ndarray:
    """Rejection-sample `count` points with x' D_rho x >= 0, near x0."""
    T = x0.size
    out = []
    need = count
    while need > 0:
        batch = max(4 * need, 1000)
        half = batch // 2
        cands = np.vstack(
            [
                x0 + rng.standard_normal((half, T)),
                x0 + 0.1 * rng.standard_normal((batch - half, T)),
            ]
        )
        vals = 2.0 * np.sum(cands[:, 1:] * cands[:, :-1], axis=1) - 2.0 * rho * np.sum(
            cands * cands, axis=1
        )
        good = cands[vals >= 0.0]
        out.append(good[:need])
        need -= len(good[:need])
    return np.vstack(out)


def quadratic_form_oracle(x: np.ndarray, rho: float) -> float:
    """x' D_rho x via the explicit dense matrix."""
    x = np.asarray(x, dtype=float)
    return float(x @ delta_rho_matrix(x.size, rho) @ x)


def assert_matches_autocorr(x: np.ndarray, rho: float, tol: float = 1e-12) -> None:
    a = autocorr_value(x, rho)
    b = quadratic_form_oracle(x, rho)
    assert abs(a - b) <= tol * max(1.0, abs(b))
