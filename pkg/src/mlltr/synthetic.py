"""Synthetic two-label ranking data with conflicting relevance criteria."""
from __future__ import annotations

from typing import Tuple

import numpy as np

from .data import MultiLabelDataset


def conflict_directions(p: int, correlation: float, rng: np.random.Generator):
    """Two unit vectors with inner product ``correlation``."""
    w1 = rng.standard_normal(p)
    w1 /= np.linalg.norm(w1)
    z = rng.standard_normal(p)
    z -= (z @ w1) * w1
    z /= np.linalg.norm(z)
    w2 = correlation * w1 + np.sqrt(1.0 - correlation ** 2) * z
    return w1, w2


def make_conflict_dataset(seed: int = 0, n_queries: int = 200, n_items: int = 20,
                          n_features: int = 10, correlation: float = -0.5,
                          noise: float = 0.5, n_levels: int = 5,
                          n_test_queries: int = 100) -> Tuple[MultiLabelDataset, MultiLabelDataset]:
    """Train and test sets whose two labels order items by ⟨w₁, x⟩ and ⟨w₂, x⟩.

    Features are standard normal; each label is the projection plus Gaussian
    noise, quantized to ``n_levels`` equal-frequency levels with cut points
    taken from the training items. ``correlation`` < 0 makes the labels
    conflict.
    """
    if not correlation < 0:
        raise ValueError("conflicting labels need a negative correlation")
    rng = np.random.default_rng(seed)
    w1, w2 = conflict_directions(n_features, correlation, rng)
    W = np.column_stack([w1, w2])

    def draw(m):
        X = rng.standard_normal((m * n_items, n_features))
        U = X @ W + noise * rng.standard_normal((m * n_items, 2))
        return X, U

    X_tr, U_tr = draw(n_queries)
    X_te, U_te = draw(n_test_queries)
    cuts = [np.quantile(U_tr[:, k], np.arange(1, n_levels) / n_levels) for k in range(2)]

    def build(X, U, m, prefix):
        levels = np.column_stack([np.searchsorted(cuts[k], U[:, k], side="right") for k in range(2)])
        offsets = np.arange(m + 1) * n_items
        return MultiLabelDataset(X, levels.astype(np.float64), offsets,
                                 [f"{prefix}{q}" for q in range(m)], ["y1", "y2"])

    train = build(X_tr, U_tr, n_queries, "q")
    test = build(X_te, U_te, n_test_queries, "t")
    return train, test
