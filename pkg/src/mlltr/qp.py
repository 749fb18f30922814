"""Exact small convex QPs over the probability simplex or the nonnegative orthant.

    minimize  ½ xᵀ H x + lᵀ x   subject to  x ≥ 0  (and Σ x = 1 for "simplex")

Solved by enumerating supports: on each candidate support the equality
constrained stationarity system is solved in the least-squares sense, kept if
consistent and feasible, and the best candidate is confirmed with a KKT check.
Exact but exponential in K, which is fine for the handful of objectives a
ranking model trades off.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

MAX_DIM = 16


class QPError(RuntimeError):
    """No certified minimizer (unbounded problem or numerical breakdown)."""


def qp_objective(H, l, x) -> float:
    return float(0.5 * x @ H @ x + l @ x)


def _solve_support(H, l, S, simplex: bool):
    HS = H[np.ix_(S, S)]
    lS = l[S]
    k = len(S)
    if simplex:
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = HS
        A[:k, k] = 1.0
        A[k, :k] = 1.0
        b = np.concatenate([-lS, [1.0]])
    else:
        A, b = HS, -lS
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    scale = max(np.abs(A).max(), np.abs(b).max(), 1e-300)
    if np.abs(A @ sol - b).max() > 1e-9 * scale:
        return None
    return sol[:k]


def _kkt_ok(H, l, x, simplex: bool) -> bool:
    g = H @ x + l
    scale = max(np.abs(H).max() * max(np.abs(x).max(), 1.0), np.abs(l).max(), 1e-300)
    tol = 1e-7 * scale
    support = x > 1e-12
    if simplex:
        # stationarity: g_i = -nu on the support, g_i >= -nu off it
        nu = -np.mean(g[support])
        return bool(np.all(np.abs(g[support] + nu) <= tol) and np.all(g[~support] + nu >= -tol))
    return bool(np.all(np.abs(g[support]) <= tol) and np.all(g[~support] >= -tol))


def simplex_qp(gram, linear, constraint: str = "simplex") -> np.ndarray:
    """Global minimizer of ½xᵀ(gram)x + linearᵀx over the feasible set.

    ``constraint`` is ``"simplex"`` (x ≥ 0, Σx = 1) or ``"nonneg"`` (x ≥ 0).
    ``gram`` must be symmetric PSD and K ≤ 16.
    """
    H = np.asarray(gram, dtype=np.float64)
    l = np.asarray(linear, dtype=np.float64)
    K = len(l)
    if H.shape != (K, K):
        raise ValueError("gram must be K x K matching linear")
    if K > MAX_DIM:
        raise ValueError(f"simplex_qp supports K <= {MAX_DIM}, got {K}")
    if constraint not in ("simplex", "nonneg"):
        raise ValueError(f"unknown constraint {constraint!r}")
    simplex = constraint == "simplex"
    H = 0.5 * (H + H.T)

    best, best_val = None, np.inf
    if not simplex:
        best, best_val = np.zeros(K), 0.0
    for size in range(1, K + 1):
        for S in combinations(range(K), size):
            S = list(S)
            xs = _solve_support(H, l, S, simplex)
            if xs is None or np.any(xs < -1e-12):
                continue
            x = np.zeros(K)
            x[S] = np.clip(xs, 0.0, None)
            if simplex:
                x /= x.sum()
            val = qp_objective(H, l, x)
            if best is None or val < best_val - 1e-15 * max(1.0, abs(best_val)):
                best, best_val = x, val
    if best is None:
        raise QPError("no feasible stationary point found")
    if not _kkt_ok(H, l, best, simplex):
        raise QPError("candidate fails KKT conditions (unbounded or ill-conditioned)")
    return best


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / ks > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)
