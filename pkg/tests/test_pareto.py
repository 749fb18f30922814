import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mlltr.pareto import (GAIN, HVIConfig, compare_preference_models, default_reference,
                          dominates, hypervolume, hypervolume_with_error, mwl, paired_t_test,
                          pareto_filter, vno)


def test_dominance_examples():
    assert not dominates([1, 1], [1, 1])
    assert dominates([1, 2], [2, 2])
    assert not dominates([1, 3], [2, 2])
    assert dominates([2, 2], [1, 2], orientation=GAIN)


triple = st.lists(st.integers(0, 3), min_size=3, max_size=3)


@settings(max_examples=300, deadline=None)
@given(triple, triple, triple)
def test_dominance_is_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)
    assert not (dominates(a, b) and dominates(b, a))


def test_pareto_filter_examples():
    np.testing.assert_array_equal(pareto_filter([[1, 2], [2, 1], [2, 2]]), [[1, 2], [2, 1]])
    np.testing.assert_array_equal(pareto_filter([[5, 5]]), [[5, 5]])


def test_pareto_filter_matches_pairwise_loop():
    rng = np.random.default_rng(0)
    P = rng.integers(0, 6, size=(100, 3)).astype(float)
    keep = [p for p in P if not any(dominates(q, p) for q in P)]
    np.testing.assert_array_equal(pareto_filter(P), np.array(keep))
    np.testing.assert_array_equal(pareto_filter(pareto_filter(P)), pareto_filter(P))


def test_mwl_and_vno():
    assert mwl([2, 3], [1, 0.5]) == 2.0
    assert mwl([2.0, 4.0], [0.5, 0.25]) == 1.0
    rng = np.random.default_rng(1)
    c, r = rng.random(4), rng.random(4)
    assert mwl(c, r) == max(ci * ri for ci, ri in zip(c, r))
    assert mwl(c, 3 * r) == pytest.approx(3 * mwl(c, r))
    assert vno([2, 3]) == 6.0
    assert vno([0, 3]) == 0.0
    assert vno([1, 2, 3]) == 6.0
    assert vno([-1, 3]) == 0.0


def test_compare_prefers_lower_mwl_then_lower_vno():
    r = [1.0, 1.0]
    assert compare_preference_models([1, 1], [2, 1], r) == -1
    assert compare_preference_models([2, 1], [2, 0.5], r) == 1
    assert compare_preference_models([2, 1], [1, 2], r) == 0
    assert compare_preference_models([2, 1], [2, 0.5], r, lower_vno_wins=False) == -1


def test_hypervolume_examples():
    assert hypervolume([[1, 1]], HVIConfig([3, 3])) == 4.0
    assert hypervolume([[1, 2], [2, 1]], HVIConfig([3, 3])) == 3.0
    assert hypervolume([[1, 1, 1]], HVIConfig([2, 3, 4])) == 6.0
    # gain orientation reflects: the box runs from the reference up to the point
    assert hypervolume([[0.8, 0.6]], HVIConfig([0.5, 0.5], orientation=GAIN)) == pytest.approx(0.03)


@pytest.mark.parametrize("K", [2, 3])
def test_exact_matches_monte_carlo(K):
    rng = np.random.default_rng(K)
    for _ in range(3):
        P = rng.random((8, K))
        cfg = HVIConfig(np.full(K, 1.2), n_samples=1_000_000, seed=int(rng.integers(1 << 30)))
        exact = hypervolume(P, cfg)
        est, se = hypervolume_with_error(P, cfg, method="mc")
        assert abs(exact - est) <= 3 * se


def test_three_d_matches_inclusion_exclusion():
    P = np.array([[1, 2, 2], [2, 1, 2], [2, 2, 1]], dtype=float)
    ref = np.full(3, 3.0)
    # union of three boxes by inclusion–exclusion
    boxes = [np.prod(ref - p) for p in P]
    pair = [np.prod(ref - np.maximum(P[i], P[j])) for i, j in ((0, 1), (0, 2), (1, 2))]
    triple_ = np.prod(ref - P.max(axis=0))
    assert hypervolume(P, HVIConfig(ref)) == pytest.approx(sum(boxes) - sum(pair) + triple_)


def test_scaling_divides_volume():
    rng = np.random.default_rng(5)
    P = rng.random((10, 2))
    d = np.array([2.0, 0.5])
    plain = hypervolume(P, HVIConfig([1.5, 1.5]))
    assert hypervolume(P, HVIConfig([1.5, 1.5], scaling=d)) == pytest.approx(plain / d.prod())


def test_monotone_and_dominated_points_ignored():
    rng = np.random.default_rng(6)
    P = rng.random((12, 2))
    cfg = HVIConfig([1.1, 1.1])
    base = hypervolume(P, cfg)
    assert hypervolume(np.vstack([P, rng.random((1, 2))]), cfg) >= base
    assert hypervolume(pareto_filter(P), cfg) == pytest.approx(base)


def test_points_beyond_reference_are_clipped():
    with pytest.warns(RuntimeWarning):
        assert hypervolume([[4, 1]], HVIConfig([3, 3])) == 0.0


def test_default_reference():
    np.testing.assert_allclose(default_reference([[1, 4], [2, 3]]), [2.02, 4.04])
    np.testing.assert_allclose(default_reference([[0.5, 0.9]], GAIN), [0.5 / 1.01, 0.9 / 1.01])


def _t_cdf(t, df):
    dens = lambda x: mpmath.gamma((df + 1) / 2) / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2)) \
        * (1 + x * x / df) ** (-(df + 1) / 2)
    return float(mpmath.quad(dens, [-mpmath.inf, t]))


def test_t_test_textbook_sleep_data():
    a = [0.7, -1.6, -0.2, -1.2, -0.1, 3.4, 3.7, 0.8, 0.0, 2.0]
    b = [1.9, 0.8, 1.1, 0.1, -0.1, 4.4, 5.5, 1.6, 4.6, 3.4]
    t, p = paired_t_test(a, b)
    assert t == pytest.approx(-4.062128, abs=1e-6)
    assert p == pytest.approx(0.002832890, abs=1e-6)
    assert p == pytest.approx(2 * _t_cdf(t, 9), abs=1e-9)


def test_t_test_degenerate_cases():
    assert paired_t_test([1, 2, 3], [1, 2, 3]) == (0.0, 1.0)
    with pytest.warns(RuntimeWarning):
        t, p = paired_t_test([2, 3, 4, 5], [1, 2, 3, 4])
    assert p == 0.0 and t == np.inf
    with pytest.raises(ValueError):
        paired_t_test([1.0], [2.0])
    with pytest.raises(ValueError):
        paired_t_test([1.0, 2.0], [2.0])
