"""Brute-force reference solvers shared by unit and acceptance tests."""
import numpy as np

from mlltr.ranking import CostState, psd_sqrt


def cost_state_from_gram(gram, costs):
    """A CostState whose gradient matrix is the symmetric root of ``gram``."""
    gram = np.asarray(gram, dtype=float)
    C = psd_sqrt(gram)
    return CostState(np.asarray(costs, dtype=float), C, C.T @ C, psd_sqrt(C.T @ C))


def _box_grid(lo, hi, n):
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))


def grid_minimize(f, dim, feasible, lo, hi, n=201, rounds=12, shrink=0.2):
    """Minimize f over a box by repeated grid evaluation around the incumbent.

    Sound for convex f on a convex feasible set: every round keeps the best
    grid point and re-grids a smaller window around it.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    best_x, best_v = None, np.inf
    base_lo, base_hi = lo.copy(), hi.copy()
    for _ in range(rounds):
        X = _box_grid(lo, hi, n)
        X = X[feasible(X)]
        if len(X):
            v = f(X)
            i = int(np.argmin(v))
            if v[i] < best_v:
                best_x, best_v = X[i], float(v[i])
        half = (hi - lo) * shrink
        lo = np.maximum(best_x - half, base_lo)
        hi = np.minimum(best_x + half, base_hi)
    return best_x, best_v


def simplex_minimize(f_alpha, K, **kw):
    """min over the probability simplex of f_alpha(A) evaluated row-wise."""
    def lift(T):
        return np.column_stack([T, 1.0 - T.sum(axis=1)])

    def feasible(T):
        return T.sum(axis=1) <= 1.0 + 1e-15

    x, v = grid_minimize(lambda T: f_alpha(lift(T)), K - 1, feasible,
                         np.zeros(K - 1), np.ones(K - 1), **kw)
    return lift(x[None, :])[0], v


def orthant_minimize(f_x, dim, upper, **kw):
    return grid_minimize(f_x, dim, lambda X: np.ones(len(X), bool),
                         np.zeros(dim), np.full(dim, upper), **kw)
