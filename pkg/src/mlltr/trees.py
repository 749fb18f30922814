"""Least-squares regression trees (CART) with exact greedy splits."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Optional

import numpy as np

LEAF = -1


@dataclass
class RegressionTree:
    """Flat array tree. ``feature[n] == LEAF`` marks a leaf; an item goes left
    when ``x[feature] <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == LEAF))

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for n in range(self.n_nodes):
            if self.feature[n] != LEAF:
                depth[self.left[n]] = depth[self.right[n]] = depth[n] + 1
        return int(depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        rows = np.arange(X.shape[0])
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            f = self.feature[node]
            inner = f != LEAF
            if not inner.any():
                return self.value[node]
            go_left = X[rows, np.where(inner, f, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def to_dict(self, n: int = 0) -> dict:
        if self.feature[n] == LEAF:
            return {"value": float(self.value[n])}
        return {
            "feature": int(self.feature[n]),
            "threshold": float(self.threshold[n]),
            "left": self.to_dict(int(self.left[n])),
            "right": self.to_dict(int(self.right[n])),
        }

    @classmethod
    def from_dict(cls, root: dict) -> "RegressionTree":
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node):
            n = len(feature)
            feature.append(LEAF)
            threshold.append(0.0)
            left.append(LEAF)
            right.append(LEAF)
            value.append(0.0)
            if "value" in node:
                value[n] = float(node["value"])
            else:
                feature[n] = int(node["feature"])
                threshold[n] = float(node["threshold"])
                left[n] = add(node["left"])
                right[n] = add(node["right"])
            return n

        add(root)
        return cls(np.array(feature, dtype=np.int64), np.array(threshold),
                   np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                   np.array(value))


def presort(features: np.ndarray) -> np.ndarray:
    """Per-feature item order, shape (p, M). Reusable across boosting rounds."""
    return np.ascontiguousarray(np.argsort(features, axis=0, kind="stable").T)


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float
    n_left: int


def _best_split(xs, targets, sorted_idx, min_leaf: int) -> Optional[_Split]:
    """``xs`` holds feature values in ``sorted_idx`` order, shape (p, n)."""
    p, n = sorted_idx.shape
    if n < 2 * min_leaf:
        return None
    ts = targets[sorted_idx]
    cs = np.cumsum(ts, axis=1)
    total = cs[:, -1:]
    n_left = np.arange(1, n, dtype=np.float64)
    left_sum = cs[:, :-1]
    right_sum = total - left_sum
    # squared-error reduction without the constant −total²/n term
    gain = left_sum * left_sum
    gain /= n_left
    right_sum *= right_sum
    right_sum /= n - n_left
    gain += right_sum
    gain[xs[:, 1:] <= xs[:, :-1]] = -np.inf
    if min_leaf > 1:
        gain[:, : min_leaf - 1] = -np.inf
        gain[:, n - min_leaf:] = -np.inf
    flat = int(np.argmax(gain))  # row-major: lowest feature, then lowest threshold
    f, pos = divmod(flat, n - 1)
    best = gain[f, pos] - float(total[0, 0]) ** 2 / n
    # splits on constant targets produce rounding-level "gains"
    if not np.isfinite(best) or best <= 1e-10 * float(np.sum(ts[0] ** 2)) + 1e-300:
        return None
    lo, hi = xs[f, pos], xs[f, pos + 1]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return _Split(float(best), f, float(thr), pos + 1)


def fit_tree(features: np.ndarray, targets: np.ndarray, config=None, presorted=None, *,
             max_depth: int = 3, max_leaves: Optional[int] = None,
             min_samples_leaf: int = 1) -> RegressionTree:
    """Fit a least-squares tree to ``targets``.

    Nodes are expanded best-first by squared-error reduction until
    ``max_leaves`` is reached or no node at depth < ``max_depth`` has a valid
    split. Leaf values are target means. ``config`` may be any object with
    ``max_depth`` / ``max_leaves`` / ``min_samples_leaf`` attributes (e.g. a
    :class:`~mlltr.gbm.GBMConfig`); it overrides the keyword defaults.
    """
    if config is not None:
        max_depth = config.max_depth
        max_leaves = config.max_leaves
        min_samples_leaf = config.min_samples_leaf
    X = np.asarray(features, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != t.shape[0] or X.shape[0] < 1:
        raise ValueError("features must be (M, p) with M >= 1 matching targets")
    if not np.all(np.isfinite(t)):
        raise ValueError("targets must be finite")
    if max_leaves is None:
        max_leaves = 2 ** max_depth
    sorted_idx = presort(X) if presorted is None else presorted

    feature, threshold, left, right, value, depth = [], [], [], [], [], []
    node_items = []

    def new_node(idx, xs, d):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(np.mean(t[idx[0]])))
        depth.append(d)
        node_items.append((idx, xs))
        return len(feature) - 1

    heap = []

    def consider(n):
        if depth[n] >= max_depth:
            return
        idx, xs = node_items[n]
        split = _best_split(xs, t, idx, min_samples_leaf)
        if split is not None:
            heapq.heappush(heap, (-split.gain, n, split))

    consider(new_node(sorted_idx, X[sorted_idx, np.arange(X.shape[1])[:, None]], 0))
    n_leaves = 1
    member = np.zeros(X.shape[0], dtype=bool)
    while heap and n_leaves < max_leaves:
        _, n, split = heapq.heappop(heap)
        idx, xs = node_items[n]
        p, size = idx.shape
        left_items = idx[split.feature, : split.n_left]
        member[left_items] = True
        goes_left = member[idx]
        member[left_items] = False
        feature[n] = split.feature
        threshold[n] = split.threshold
        goes_right = ~goes_left
        n_l, n_r = split.n_left, size - split.n_left
        left[n] = new_node(idx[goes_left].reshape(p, n_l), xs[goes_left].reshape(p, n_l), depth[n] + 1)
        right[n] = new_node(idx[goes_right].reshape(p, n_r), xs[goes_right].reshape(p, n_r),
                            depth[n] + 1)
        node_items[n] = None
        n_leaves += 1
        consider(left[n])
        consider(right[n])

    return RegressionTree(np.array(feature, dtype=np.int64), np.array(threshold),
                          np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                          np.array(value))
