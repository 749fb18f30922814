import numpy as np
import pytest

from mlltr.qp import MAX_DIM, QPError, project_to_simplex, simplex_qp


def simplex_grid(K, step):
    n = int(round(1 / step))
    if K == 2:
        a = np.arange(n + 1) / n
        return np.column_stack([a, 1 - a])
    pts = [(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)]
    return np.array(pts, dtype=float) / n


def objective(H, l, X):
    return 0.5 * np.einsum("ni,ij,nj->n", X, H, X) + X @ l


def random_psd(rng, K, rank=None):
    A = rng.normal(size=(rank or K, K))
    return A.T @ A


def test_projection_by_sorting_oracle():
    """gram = I, linear = -a reduces to Euclidean projection of a."""
    rng = np.random.default_rng(0)
    for _ in range(50):
        K = int(rng.integers(2, 7))
        a = rng.normal(size=K) * 2
        # independent bisection on the shift θ: Σ max(a − θ, 0) = 1
        lo, hi = a.min() - 1, a.max()
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if np.maximum(a - mid, 0).sum() > 1 else (lo, mid)
        expected = np.maximum(a - 0.5 * (lo + hi), 0)
        np.testing.assert_allclose(simplex_qp(np.eye(K), -a), expected, atol=1e-9)
        np.testing.assert_allclose(project_to_simplex(a), expected, atol=1e-9)


def test_symmetric_problem_is_uniform():
    np.testing.assert_allclose(simplex_qp(np.eye(4), np.zeros(4)), np.full(4, 0.25))


@pytest.mark.parametrize("K", [2, 3])
def test_matches_grid_minimum(K):
    rng = np.random.default_rng(K)
    grid = simplex_grid(K, 1e-3)
    for _ in range(25):
        H = random_psd(rng, K, rank=int(rng.integers(1, K + 1)))
        l = rng.normal(size=K)
        x = simplex_qp(H, l)
        assert x.min() >= 0 and x.sum() == pytest.approx(1.0)
        best = objective(H, l, grid).min()
        val = 0.5 * x @ H @ x + l @ x
        assert val <= best + 1e-8


def test_nonneg_closed_form():
    # diagonal H: x_i = max(0, -l_i / h_i)
    H = np.diag([1.0, 2.0, 4.0])
    l = np.array([-1.0, 3.0, -2.0])
    np.testing.assert_allclose(simplex_qp(H, l, "nonneg"), [1.0, 0.0, 0.5])


def test_nonneg_unbounded_raises():
    with pytest.raises(QPError):
        simplex_qp(np.zeros((2, 2)), np.array([-1.0, 0.0]), "nonneg")


def test_tiny_scale_is_solved():
    # gradients averaged over many queries give grams around 1e-8
    rng = np.random.default_rng(9)
    H = random_psd(rng, 2) * 1e-8
    l = rng.normal(size=2) * 1e-5
    x = simplex_qp(H, l)
    grid = simplex_grid(2, 1e-4)
    assert 0.5 * x @ H @ x + l @ x <= objective(H, l, grid).min() + 1e-16


def test_argument_checks():
    with pytest.raises(ValueError):
        simplex_qp(np.eye(MAX_DIM + 1), np.zeros(MAX_DIM + 1))
    with pytest.raises(ValueError):
        simplex_qp(np.eye(2), np.zeros(3))
    with pytest.raises(ValueError):
        simplex_qp(np.eye(2), np.zeros(2), "box")
