"""Pairwise ranking losses, score-gradients and NDCG.

Two code paths compute the same quantities: small per-query functions that
read like the textbook definitions, and :class:`PairwiseObjective`,
which precomputes every ordered pair of the dataset once and evaluates all
queries with flat array operations. Training uses the batched
path; tests hold the two against each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .data import MultiLabelDataset


@dataclass(frozen=True)
class LossConfig:
    """Pairwise logistic loss settings.

    ``use_delta_ndcg=False`` drops the |ΔNDCG| pair weight (RankNet cost) and
    builds pairs from the dataset's raw label values.
    """

    sigma: float = 1.0
    use_delta_ndcg: bool = True
    ndcg_truncation: Optional[int] = 5

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass
class CostState:
    costs: np.ndarray  # (K,)
    gradients: np.ndarray  # (M, K), column k = d c_k / d s
    gram: np.ndarray  # (K, K)
    gram_sqrt: np.ndarray  # (K, K)

    @property
    def n_objectives(self) -> int:
        return self.costs.shape[0]


def _check_scores(scores: np.ndarray) -> None:
    if np.isnan(scores).any():
        raise FloatingPointError("NaN in scores")


def gains(labels, kind: str = "exponential") -> np.ndarray:
    labels = np.asarray(labels, dtype=np.float64)
    if kind == "exponential":
        return np.exp2(labels) - 1.0
    if kind == "linear":
        return labels
    raise ValueError(f"unknown gain kind {kind!r}")


def score_ranks(scores) -> np.ndarray:
    """1-based rank position of every item, highest score first.

    Ties keep the original item order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def _discount(ranks) -> np.ndarray:
    return 1.0 / np.log2(1.0 + np.asarray(ranks, dtype=np.float64))


def ideal_dcg(labels, k: Optional[int] = None, gain: str = "exponential") -> float:
    g = np.sort(gains(labels, gain))[::-1]
    if k is not None:
        g = g[:k]
    return float(np.sum(g * _discount(np.arange(1, len(g) + 1))))


def delta_ndcg(labels, ranks_by_score, i: int, j: int, gain: str = "exponential") -> float:
    """|NDCG change| when items ``i`` and ``j`` swap rank positions."""
    if i == j:
        raise ValueError("delta_ndcg needs two distinct items")
    idcg = ideal_dcg(labels, gain=gain)
    if idcg == 0.0:
        return 0.0
    g = gains(labels, gain)
    d = _discount(ranks_by_score)
    return float(abs((g[i] - g[j]) * (d[i] - d[j])) / idcg)


def ndcg_at_k(scores, labels, k: int, gain: str = "exponential") -> float:
    """NDCG@k of the ranking induced by ``scores``.

    A query with no positive gain scores 1.0 (vacuously perfect ranking).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.asarray(scores, dtype=np.float64)
    _check_scores(scores)
    labels = np.asarray(labels, dtype=np.float64)
    idcg = ideal_dcg(labels, k, gain)
    if idcg == 0.0:
        return 1.0
    order = np.argsort(-scores, kind="stable")[:k]
    dcg = np.sum(gains(labels[order], gain) * _discount(np.arange(1, len(order) + 1)))
    return float(dcg / idcg)


def _pair_weights(scores, labels, cfg: LossConfig) -> np.ndarray:
    n = len(labels)
    pairs = labels[:, None] > labels[None, :]
    if not cfg.use_delta_ndcg:
        return pairs.astype(np.float64)
    w = np.zeros((n, n))
    ranks = score_ranks(scores)
    for i, j in zip(*np.nonzero(pairs)):
        w[i, j] = delta_ndcg(labels, ranks, i, j)
    return w


def per_query_loss(scores, labels, cfg: LossConfig) -> float:
    """Σ over ordered pairs (y_i > y_j) of w_ij · log(1 + exp(-σ (s_i - s_j)))."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    _check_scores(scores)
    w = _pair_weights(scores, labels, cfg)
    diff = scores[:, None] - scores[None, :]
    return float(np.sum(w * np.logaddexp(0.0, -cfg.sigma * diff)))


def per_query_gradient(scores, labels, cfg: LossConfig) -> np.ndarray:
    """Analytic d loss / d scores with the pair weights held fixed."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    _check_scores(scores)
    w = _pair_weights(scores, labels, cfg)
    diff = scores[:, None] - scores[None, :]
    rho = cfg.sigma * w * expit(-cfg.sigma * diff)
    return rho.sum(axis=0) - rho.sum(axis=1)


# -- batched evaluation -----------------------------------------------------

@dataclass
class _Block:
    queries: np.ndarray  # dataset query positions in this block
    index: np.ndarray  # (b, n_max) item index, padded with 0
    mask: np.ndarray  # (b, n_max)


class QueryLayout:
    """Queries packed into padded blocks of similar size, used to rank every
    query's items at once."""

    def __init__(self, query_offsets: np.ndarray, max_cells: int = 4_000_000):
        offsets = np.asarray(query_offsets, dtype=np.int64)
        sizes = np.diff(offsets)
        self.offsets = offsets
        self.n_items = int(offsets[-1])
        self.n_queries = len(sizes)
        self.query_of_item = np.repeat(np.arange(self.n_queries), sizes)
        order = np.argsort(sizes, kind="stable")
        self.blocks: List[_Block] = []
        start = 0
        while start < len(order):
            stop = start + 1
            while stop < len(order) and (stop + 1 - start) * int(sizes[order[stop]]) <= max_cells:
                stop += 1
            qs = order[start:stop]
            n_max = int(sizes[qs].max())
            pos = np.arange(n_max)
            mask = pos[None, :] < sizes[qs][:, None]
            index = np.where(mask, offsets[qs][:, None] + pos[None, :], 0)
            self.blocks.append(_Block(qs, index, mask))
            start = stop

    @classmethod
    def for_dataset(cls, dataset: MultiLabelDataset) -> "QueryLayout":
        return cls(dataset.query_offsets)

    def ranks(self, scores: np.ndarray) -> np.ndarray:
        """1-based within-query rank of every item (stable on ties)."""
        ranks = np.empty(self.n_items, dtype=np.int64)
        for blk in self.blocks:
            S = np.where(blk.mask, scores[blk.index], -np.inf)
            order = np.argsort(-S, axis=1, kind="stable")
            r = np.empty_like(order)
            np.put_along_axis(r, order, np.arange(1, S.shape[1] + 1)[None, :], axis=1)
            ranks[blk.index[blk.mask]] = r[blk.mask]
        return ranks


class PairwiseObjective:
    """One label column's pairwise loss over a fixed query layout.

    The ordered pairs (y_i > y_j within a query) and the per-query ideal DCG
    do not change during training, so they are built once.
    """

    def __init__(self, labels: np.ndarray, layout: QueryLayout, cfg: LossConfig):
        self.cfg = cfg
        self.layout = layout
        y = np.asarray(labels, dtype=np.float64)
        hi, lo = [], []
        offs = layout.offsets
        for q in range(layout.n_queries):
            a, b = offs[q], offs[q + 1]
            yq = y[a:b]
            i, j = np.nonzero(yq[:, None] > yq[None, :])
            hi.append(i + a)
            lo.append(j + a)
        self.hi = np.concatenate(hi).astype(np.int64)
        self.lo = np.concatenate(lo).astype(np.int64)
        self.pair_query = layout.query_of_item[self.hi]
        if cfg.use_delta_ndcg:
            self.gain = gains(y)
            idcg = np.array([ideal_dcg(y[offs[q]:offs[q + 1]]) for q in range(layout.n_queries)])
            inv = np.divide(1.0, idcg, out=np.zeros_like(idcg), where=idcg > 0)
            self.pair_gain = np.abs(self.gain[self.hi] - self.gain[self.lo]) * inv[self.pair_query]

    def pair_weights(self, ranks: Optional[np.ndarray]) -> np.ndarray:
        if not self.cfg.use_delta_ndcg:
            return np.ones(len(self.hi))
        disc = 1.0 / np.log2(1.0 + ranks)
        return self.pair_gain * np.abs(disc[self.hi] - disc[self.lo])

    def losses_and_gradient(self, scores: np.ndarray, ranks: Optional[np.ndarray] = None):
        """Per-query losses (dataset order) and d(Σ losses)/d scores."""
        sigma = self.cfg.sigma
        if self.cfg.use_delta_ndcg and ranks is None:
            ranks = self.layout.ranks(scores)
        w = self.pair_weights(ranks)
        x = sigma * (scores[self.hi] - scores[self.lo])
        e = np.exp(-np.abs(x))
        softplus = np.maximum(-x, 0.0) + np.log1p(e)  # log(1 + exp(-x))
        sig = np.where(x >= 0, e, 1.0) / (1.0 + e)  # 1 / (1 + exp(x))
        n, m = self.layout.n_items, self.layout.n_queries
        losses = np.bincount(self.pair_query, weights=w * softplus, minlength=m)
        rho = sigma * w * sig
        grad = np.bincount(self.lo, weights=rho, minlength=n) - np.bincount(self.hi, weights=rho, minlength=n)
        return losses, grad


def query_losses_and_gradient(scores: np.ndarray, labels: np.ndarray, layout: QueryLayout,
                              cfg: LossConfig):
    """Per-query losses (length m, dataset order) and the per-item gradient of
    the summed loss."""
    return PairwiseObjective(labels, layout, cfg).losses_and_gradient(np.asarray(scores, dtype=np.float64))


def psd_sqrt(gram: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix (negative eigenvalues
    clamped to 0)."""
    sym = 0.5 * (gram + gram.T)
    w, V = np.linalg.eigh(sym)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def _configs(cfg, K: int) -> List[LossConfig]:
    if isinstance(cfg, LossConfig):
        return [cfg] * K
    cfgs = list(cfg)
    if len(cfgs) != K:
        raise ValueError("need one LossConfig per label")
    return cfgs


def label_column(dataset: MultiLabelDataset, k: int, cfg: LossConfig) -> np.ndarray:
    return dataset.labels[:, k] if cfg.use_delta_ndcg else dataset.raw_labels[:, k]


class MultiObjective:
    """All K pairwise objectives of a dataset, sharing one layout."""

    def __init__(self, dataset: MultiLabelDataset, cfg: Union[LossConfig, Sequence[LossConfig]]):
        self.layout = QueryLayout.for_dataset(dataset)
        self.n_queries = dataset.n_queries
        cfgs = _configs(cfg, dataset.label_count)
        self.objectives = [PairwiseObjective(label_column(dataset, k, c), self.layout, c)
                           for k, c in enumerate(cfgs)]
        self.needs_ranks = any(c.use_delta_ndcg for c in cfgs)

    def cost_state(self, scores: np.ndarray) -> CostState:
        scores = np.asarray(scores, dtype=np.float64)
        _check_scores(scores)
        ranks = self.layout.ranks(scores) if self.needs_ranks else None
        K = len(self.objectives)
        costs = np.empty(K)
        C = np.empty((self.layout.n_items, K))
        for k, obj in enumerate(self.objectives):
            losses, grad = obj.losses_and_gradient(scores, ranks)
            costs[k] = losses.sum() / self.n_queries
            C[:, k] = grad / self.n_queries
        gram = C.T @ C
        return CostState(costs, C, gram, psd_sqrt(gram))


def cost_state_from_scores(scores: np.ndarray, dataset: MultiLabelDataset,
                           cfg: Union[LossConfig, Sequence[LossConfig]]) -> CostState:
    """Mean per-query costs, their score-gradients and the Gram matrix."""
    return MultiObjective(dataset, cfg).cost_state(scores)


def evaluate_costs(ensemble, dataset: MultiLabelDataset,
                   cfg: Union[LossConfig, Sequence[LossConfig]]) -> CostState:
    if ensemble.feature_dim != dataset.feature_dim:
        raise ValueError("ensemble and dataset feature dimensions differ")
    return cost_state_from_scores(ensemble.predict(dataset.features), dataset, cfg)


def mean_ndcg(scores: np.ndarray, dataset: MultiLabelDataset, k: int = 5,
              exclude_empty: bool = True) -> np.ndarray:
    """Mean NDCG@k per label column over queries.

    With ``exclude_empty`` queries whose ideal DCG is 0 for a label are left
    out of that label's average.
    """
    scores = np.asarray(scores, dtype=np.float64)
    out = np.empty(dataset.label_count)
    offs = dataset.query_offsets
    for lab in range(dataset.label_count):
        vals = []
        for q in range(dataset.n_queries):
            y = dataset.labels[offs[q]:offs[q + 1], lab]
            if exclude_empty and ideal_dcg(y, k) == 0.0:
                continue
            vals.append(ndcg_at_k(scores[offs[q]:offs[q + 1]], y, k))
        out[lab] = float(np.mean(vals)) if vals else 1.0
    return out
