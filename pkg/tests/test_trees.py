import numpy as np
import pytest

from mlltr.trees import LEAF, RegressionTree, fit_tree, presort


def best_stump_sse(X, t, min_leaf=1):
    """Exhaustive oracle over every feature and every cut between distinct values."""
    best = np.sum((t - t.mean()) ** 2)
    for f in range(X.shape[1]):
        for thr in np.unique(X[:, f])[:-1]:
            left = X[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            sse = np.sum((t[left] - t[left].mean()) ** 2) + np.sum((t[~left] - t[~left].mean()) ** 2)
            best = min(best, sse)
    return best


def test_constant_targets_give_single_leaf():
    X = np.random.default_rng(0).normal(size=(30, 3))
    tree = fit_tree(X, np.full(30, 2.5), max_depth=4)
    assert tree.n_leaves == 1
    np.testing.assert_array_equal(tree.predict(X), 2.5)


def test_constant_features_give_single_leaf():
    tree = fit_tree(np.ones((10, 2)), np.arange(10.0), max_depth=3)
    assert tree.n_leaves == 1
    assert tree.value[0] == pytest.approx(4.5)


def test_perfect_stump():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    tree = fit_tree(X, np.array([0.0, 0.0, 1.0, 1.0]), max_depth=1)
    assert tree.feature[0] == 0 and 1.0 <= tree.threshold[0] < 2.0
    np.testing.assert_array_equal(tree.predict(X), [0, 0, 1, 1])


def test_stump_matches_exhaustive_oracle():
    rng = np.random.default_rng(1)
    for _ in range(10):
        X = np.round(rng.normal(size=(60, 4)), 1)
        t = rng.normal(size=60)
        tree = fit_tree(X, t, max_depth=1)
        sse = np.sum((tree.predict(X) - t) ** 2)
        assert sse == pytest.approx(best_stump_sse(X, t), rel=1e-9, abs=1e-12)


def test_depth_two_beats_best_stump():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(200, 5))
    t = rng.normal(size=200)
    tree = fit_tree(X, t, max_depth=2)
    assert np.mean((tree.predict(X) - t) ** 2) <= best_stump_sse(X, t) / 200 + 1e-12
    assert tree.depth <= 2


def test_constraints_respected():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(300, 4))
    t = rng.normal(size=300)
    tree = fit_tree(X, t, max_depth=6, max_leaves=5, min_samples_leaf=20)
    assert tree.n_leaves <= 5
    leaf_of = _leaf_ids(tree, X)
    assert np.bincount(leaf_of)[np.unique(leaf_of)].min() >= 20
    for leaf in np.unique(leaf_of):
        assert tree.value[leaf] == pytest.approx(t[leaf_of == leaf].mean())


def _leaf_ids(tree, X):
    out = np.empty(len(X), dtype=int)
    for i, x in enumerate(X):
        n = 0
        while tree.feature[n] != LEAF:
            n = tree.left[n] if x[tree.feature[n]] <= tree.threshold[n] else tree.right[n]
        out[i] = n
    return out


def test_vectorized_predict_matches_node_walk():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(100, 3))
    tree = fit_tree(X, rng.normal(size=100), max_depth=4)
    Z = rng.normal(size=(50, 3))
    np.testing.assert_array_equal(tree.predict(Z), tree.value[_leaf_ids(tree, Z)])


def test_ties_prefer_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    tree = fit_tree(X, np.array([0.0, 1.0]), max_depth=1)
    assert tree.feature[0] == 0


def test_presorted_reuse_and_determinism():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 3))
    t = rng.normal(size=80)
    a = fit_tree(X, t, max_depth=3)
    b = fit_tree(X, t, presorted=presort(X), max_depth=3)
    for attr in ("feature", "threshold", "left", "right", "value"):
        np.testing.assert_array_equal(getattr(a, attr), getattr(b, attr))


def test_dict_round_trip():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(50, 2))
    tree = fit_tree(X, rng.normal(size=50), max_depth=3)
    back = RegressionTree.from_dict(tree.to_dict())
    np.testing.assert_array_equal(back.predict(X), tree.predict(X))


def test_bad_inputs():
    with pytest.raises(ValueError):
        fit_tree(np.zeros((3, 1)), np.array([0.0, np.inf, 1.0]))
    with pytest.raises(ValueError):
        fit_tree(np.zeros((3, 1)), np.zeros(2))
