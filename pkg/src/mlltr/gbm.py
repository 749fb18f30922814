"""Multi-label gradient boosting: fit each tree to a convex combination of the
per-label score-gradients and subtract it from the scores."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from typing import IO, List, Optional, Sequence, Union

import numpy as np

from .combinators import Combinator, CombinatorState, Preference, get_coefficients
from .data import MultiLabelDataset
from .ranking import LossConfig, MultiObjective, mean_ndcg
from .trees import RegressionTree, fit_tree, presort

logger = logging.getLogger(__name__)

MODEL_FORMAT = "mlltr-ensemble"
MODEL_VERSION = 1


@dataclass(frozen=True)
class GBMConfig:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    max_leaves: Optional[int] = None
    min_samples_leaf: int = 1
    convergence_tol: float = 1e-9
    rng_seed: int = 0
    smoothing: bool = False
    nu: float = 0.1
    far_threshold: float = 0.01
    barrier_beta: float = 1.0
    eval_every: int = 0  # validation NDCG every n rounds; 0 = never

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.convergence_tol < 0:
            raise ValueError("convergence_tol must be >= 0")


@dataclass
class TreeEnsemble:
    """f(x) = init_score − Σ_t η_t · tree_t(x)."""

    feature_dim: int
    init_score: float = 0.0
    trees: List[RegressionTree] = field(default_factory=list)
    learning_rates: List[float] = field(default_factory=list)

    def append(self, tree: RegressionTree, learning_rate: float) -> None:
        self.trees.append(tree)
        self.learning_rates.append(float(learning_rate))

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.feature_dim:
            raise ValueError(f"expected {self.feature_dim} features, got {X.shape[1]}")
        s = np.full(X.shape[0], self.init_score)
        for tree, eta in zip(self.trees, self.learning_rates):
            s = s - eta * tree.predict(X)
        return s[0] if single else s

    def truncated(self, n_trees: int) -> "TreeEnsemble":
        return TreeEnsemble(self.feature_dim, self.init_score, self.trees[:n_trees],
                            self.learning_rates[:n_trees])

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "feature_dim": self.feature_dim,
            "init_score": self.init_score,
            "learning_rates": list(self.learning_rates),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not an mlltr ensemble")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        return cls(int(d["feature_dim"]), float(d["init_score"]),
                   [RegressionTree.from_dict(t) for t in d["trees"]],
                   [float(e) for e in d["learning_rates"]])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "TreeEnsemble":
        return cls.from_dict(json.loads(text))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path: str) -> "TreeEnsemble":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.loads(fh.read())


def predict(ensemble: TreeEnsemble, feature_vector) -> float:
    return float(ensemble.predict(np.asarray(feature_vector, dtype=np.float64).ravel()))


@dataclass
class TrainingTrace:
    """Per-round record: costs before the round's tree, the raw and the applied
    coefficients, EC multipliers, and optional validation NDCG."""

    label_names: List[str]
    costs: List[np.ndarray] = field(default_factory=list)
    alpha_raw: List[np.ndarray] = field(default_factory=list)
    alpha: List[np.ndarray] = field(default_factory=list)
    multipliers: List[np.ndarray] = field(default_factory=list)
    valid_ndcg: dict = field(default_factory=dict)
    annotations: List[str] = field(default_factory=list)
    final_costs: Optional[np.ndarray] = None
    stopped_early: bool = False

    @property
    def n_rounds(self) -> int:
        return len(self.alpha)

    def cost_matrix(self) -> np.ndarray:
        return np.array(self.costs)

    def alpha_matrix(self) -> np.ndarray:
        return np.array(self.alpha)

    def write_csv(self, stream: IO[str]) -> None:
        K = len(self.label_names)
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["iter"] + [f"c_{k + 1}" for k in range(K)] + [f"alpha_{k + 1}" for k in range(K)]
                   + [f"alpha_raw_{k + 1}" for k in range(K)])
        for t in range(self.n_rounds):
            w.writerow([t] + [repr(float(v)) for v in self.costs[t]]
                       + [repr(float(v)) for v in self.alpha[t]]
                       + [repr(float(v)) for v in self.alpha_raw[t]])

    def save_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.write_csv(fh)


def combine_gradients(gradients: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """λ = Cα, summed column by column in index order."""
    lam = alpha[0] * gradients[:, 0]
    for k in range(1, gradients.shape[1]):
        lam = lam + alpha[k] * gradients[:, k]
    return lam


def train(dataset: MultiLabelDataset, preference: Optional[Preference] = None,
          combinator: Union[Combinator, str] = Combinator.LS,
          gbm_cfg: GBMConfig = GBMConfig(),
          loss_cfg: Union[LossConfig, Sequence[LossConfig]] = LossConfig(),
          valid: Optional[MultiLabelDataset] = None,
          state: Optional[CombinatorState] = None):
    """Boost ``gbm_cfg.n_trees`` trees; returns (ensemble, trace).

    Each round evaluates costs and score-gradients at the current scores, asks
    the combinator for α, fits a tree to λ = Cα and subtracts η·tree. The loop
    stops early once the cost vector stops moving (‖Δc‖ < convergence_tol).
    """
    kind = Combinator(combinator)
    K = dataset.label_count
    if preference is None:
        if kind.uses_bounds:
            raise ValueError(f"{kind.value} needs a constraint-form preference")
        preference = Preference(weights=tuple([1.0] * K))
    preference.check(kind, K)
    if state is None:
        state = CombinatorState(K, smoothing=gbm_cfg.smoothing, nu=gbm_cfg.nu,
                                seed=gbm_cfg.rng_seed, far_threshold=gbm_cfg.far_threshold,
                                barrier_beta=gbm_cfg.barrier_beta)

    X = dataset.features
    objective = MultiObjective(dataset, loss_cfg)
    order = presort(X)
    ensemble = TreeEnsemble(dataset.feature_dim, 0.0)
    scores = np.full(dataset.n_items, ensemble.init_score)
    trace = TrainingTrace(list(dataset.label_names))
    eta = gbm_cfg.learning_rate
    prev_costs = None

    for t in range(gbm_cfg.n_trees):
        cs = objective.cost_state(scores)
        if prev_costs is not None:
            moved = float(np.linalg.norm(cs.costs - prev_costs))
            if moved < gbm_cfg.convergence_tol or moved == 0.0:
                trace.stopped_early = True
                logger.debug("cost vector stalled at round %d", t)
                break
        prev_costs = cs.costs
        alpha = get_coefficients(kind, cs, preference, state)
        lam = combine_gradients(cs.gradients, alpha)
        tree = fit_tree(X, lam, gbm_cfg, order)
        ensemble.append(tree, eta)
        scores = scores - eta * tree.predict(X)

        trace.costs.append(cs.costs)
        trace.alpha_raw.append(state.last_raw)
        trace.alpha.append(alpha)
        trace.multipliers.append(state.ec_multipliers.copy())
        if valid is not None and gbm_cfg.eval_every and (t + 1) % gbm_cfg.eval_every == 0:
            trace.valid_ndcg[t + 1] = mean_ndcg(ensemble.predict(valid.features), valid, 5)

    trace.final_costs = objective.cost_state(scores).costs
    trace.annotations = list(state.annotations)
    return ensemble, trace
