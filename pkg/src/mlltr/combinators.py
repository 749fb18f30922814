"""Gradient-combination coefficients for multi-label boosting.

Every rule maps the current cost vector / score-gradient matrix to a vector
α on the probability simplex; the booster then fits its next tree to Cα.
Rules that carry information across rounds (SLA's generator, EC-AL's
multipliers, the moving average) keep it in a :class:`CombinatorState`, which
must be used by a single training run at a time.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .qp import QPError, simplex_qp
from .ranking import CostState

logger = logging.getLogger(__name__)


class Combinator(str, enum.Enum):
    LS = "LS"
    SLA = "SLA"
    WC = "WC"
    EPO = "EPO"
    WC_MGDA = "WC-MGDA"
    EC_AL = "EC-AL"
    EC_DBGD = "EC-DBGD"

    @property
    def uses_bounds(self) -> bool:
        return self in (Combinator.EC_AL, Combinator.EC_DBGD)


PRIORITY_KINDS = (Combinator.LS, Combinator.SLA, Combinator.WC, Combinator.EPO, Combinator.WC_MGDA)


@dataclass(frozen=True)
class Preference:
    """A trade-off specification.

    Priority form: ``weights`` (r ≥ 0, not all zero; EPO needs r > 0 and a
    zero weight makes LS a single-objective baseline). Constraint form: ``primary_index`` plus
    ``bounds`` (one upper bound per secondary objective, in index order) and
    the multiplier growth rate ``mu``. ``reference`` is the loss vector of a
    reference model (WC shifts by it, WC-MGDA measures against it) and
    ``slack`` is WC-MGDA's u (``None``: 0.1·‖r ⊙ c⁰‖ with c⁰ the first cost).
    """

    weights: Optional[Tuple[float, ...]] = None
    primary_index: Optional[int] = None
    bounds: Optional[Tuple[float, ...]] = None
    mu: float = 10.0
    reference: Optional[Tuple[float, ...]] = None
    slack: Optional[float] = None

    def __post_init__(self):
        priority = self.weights is not None
        ec = self.primary_index is not None or self.bounds is not None
        if priority == ec:
            raise ValueError("set either weights or (primary_index, bounds)")
        if priority:
            r = np.asarray(self.weights, dtype=np.float64)
            if r.ndim != 1 or len(r) < 1 or not np.all(np.isfinite(r)) or np.any(r < 0) \
                    or not r.sum() > 0:
                raise ValueError("weights must be finite, nonnegative and not all zero")
            object.__setattr__(self, "weights", tuple(float(v) for v in r))
        else:
            if self.primary_index is None or self.bounds is None:
                raise ValueError("constraint form needs both primary_index and bounds")
            eps = np.asarray(self.bounds, dtype=np.float64).ravel()
            if not np.all(np.isfinite(eps)):
                raise ValueError("bounds must be finite")
            if not self.mu > 0:
                raise ValueError("mu must be positive")
            object.__setattr__(self, "bounds", tuple(float(v) for v in eps))
        if self.reference is not None:
            object.__setattr__(self, "reference", tuple(float(v) for v in self.reference))
        if self.slack is not None and self.slack < 0:
            raise ValueError("slack must be >= 0")

    @property
    def is_priority(self) -> bool:
        return self.weights is not None

    @property
    def n_objectives(self) -> int:
        return len(self.weights) if self.is_priority else len(self.bounds) + 1

    @property
    def r(self) -> np.ndarray:
        return np.asarray(self.weights)

    @property
    def b(self) -> Optional[np.ndarray]:
        return None if self.reference is None else np.asarray(self.reference)

    def secondary(self) -> np.ndarray:
        return np.array([k for k in range(self.n_objectives) if k != self.primary_index])

    def check(self, kind: Combinator, K: int) -> None:
        if kind.uses_bounds and self.is_priority:
            raise ValueError(f"{kind.value} needs a constraint-form preference")
        if not kind.uses_bounds and not self.is_priority:
            raise ValueError(f"{kind.value} needs a priority-form preference")
        if self.n_objectives != K:
            raise ValueError(f"preference has {self.n_objectives} objectives, data has {K}")
        if kind is Combinator.EPO and not np.all(self.r > 0):
            raise ValueError("EPO needs strictly positive weights (it uses 1/r)")
        if not self.is_priority and not 0 <= self.primary_index < K:
            raise ValueError("primary_index out of range")
        if self.reference is not None and len(self.reference) != K:
            raise ValueError("reference must have one loss per objective")


@dataclass
class AnchorDirection:
    a: np.ndarray
    mode: str  # "pull-to-ray" or "along-ray"


@dataclass
class CombinatorState:
    """Mutable per-run combinator state.

    ``smoothing`` turns on the moving average with factor ``nu`` applied to
    the new raw coefficients.
    """

    n_objectives: int
    smoothing: bool = False
    nu: float = 0.1
    seed: int = 0
    far_threshold: float = 0.01
    barrier_beta: float = 1.0
    prev_alpha: Optional[np.ndarray] = None
    smoothed_alpha: Optional[np.ndarray] = None
    ec_multipliers: Optional[np.ndarray] = None
    initial_costs: Optional[np.ndarray] = None
    last_raw: Optional[np.ndarray] = None
    annotations: List[str] = field(default_factory=list)
    iteration: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")
        self.rng = np.random.default_rng(self.seed)
        if self.ec_multipliers is None:
            self.ec_multipliers = np.zeros(max(self.n_objectives - 1, 0))

    def annotate(self, message: str) -> None:
        note = f"iter {self.iteration}: {message}"
        logger.debug(note)
        self.annotations.append(note)


def _to_simplex(alpha) -> np.ndarray:
    a = np.clip(np.asarray(alpha, dtype=np.float64), 0.0, None)
    s = a.sum()
    if not s > 0:
        raise ValueError("coefficients vanish")
    return a / s


def _one_hot(k: int, K: int) -> np.ndarray:
    e = np.zeros(K)
    e[k] = 1.0
    return e


def ls_coefficients(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    return r / r.sum()


def sla_coefficients(r, rng: np.random.Generator) -> np.ndarray:
    """One-hot vector whose index is drawn with probability r_k / Σr."""
    p = ls_coefficients(r)
    k = int(rng.choice(len(p), p=p))
    return _one_hot(k, len(p))


def wc_coefficients(c, r) -> np.ndarray:
    """One-hot at argmax_k r_k c_k (lowest index on ties)."""
    weighted = np.asarray(r, dtype=np.float64) * np.asarray(c, dtype=np.float64)
    return _one_hot(int(np.argmax(weighted)), len(weighted))


def epo_anchor(c, r, far_threshold: float = 0.01) -> AnchorDirection:
    """Target first-order cost change for EPO.

    Far from the r⁻¹ ray (cosine distance above ``far_threshold``) the anchor
    is the component of c orthogonal to the ray, so descent along it turns the
    cost vector toward the ray; otherwise it is r⁻¹ itself.
    """
    c = np.asarray(c, dtype=np.float64)
    r_inv = 1.0 / np.asarray(r, dtype=np.float64)
    c_norm = np.linalg.norm(c)
    if len(c) == 1 or c_norm == 0.0:
        return AnchorDirection(r_inv, "along-ray")
    cos_dist = 1.0 - float(c @ r_inv) / (c_norm * np.linalg.norm(r_inv))
    if cos_dist > far_threshold:
        a = c - (c @ r_inv) / (r_inv @ r_inv) * r_inv
        return AnchorDirection(a, "pull-to-ray")
    return AnchorDirection(r_inv, "along-ray")


def epo_coefficients(cost_state: CostState, anchor: AnchorDirection) -> np.ndarray:
    """argmin over the simplex of ‖CᵀCα − a‖²."""
    G = cost_state.gram
    K = G.shape[0]
    if K == 1:
        return np.ones(1)
    if not np.any(G):
        raise QPError("all score-gradients are zero")
    return _to_simplex(simplex_qp(G @ G, -(G @ anchor.a), "simplex"))


def wcmgda_objective(alpha, v, Gr, u) -> float:
    return float(alpha @ v - u * np.linalg.norm(Gr @ alpha))


def wcmgda_coefficients(cost_state: CostState, r, b=None, u: float = 0.0) -> np.ndarray:
    """Maximize αᵀ(r ⊙ (c − b)) − u‖G_r α‖ over the simplex.

    G_r = diag(√r) √(CᵀC) diag(√r). The concave problem is solved through its
    KKT conditions: at an optimum with G_r α ≠ 0, α also solves the QP
    min ½αᵀ(G_rᵀG_r)α − t·vᵀα with t = ‖G_r α‖/u, so we bisect on t. Vertices
    and the t → 0 end are evaluated too and the best point is returned.
    """
    r = np.asarray(r, dtype=np.float64)
    c = cost_state.costs
    K = len(c)
    if K == 1:
        return np.ones(1)
    b = np.zeros(K) if b is None else np.asarray(b, dtype=np.float64)
    v = r * (c - b)
    if u == 0.0:
        return _one_hot(int(np.argmax(v)), K)
    sr = np.sqrt(r)
    Gr = sr[:, None] * cost_state.gram_sqrt * sr[None, :]
    Q = Gr.T @ Gr

    candidates = [_one_hot(k, K) for k in range(K)]

    def path(t):
        return simplex_qp(Q, -t * v, "simplex")

    def gap(t):
        x = path(t)
        return np.linalg.norm(Gr @ x) / u - t, x

    lo = 0.0
    g_lo, x_lo = gap(lo)
    candidates.append(x_lo)
    if g_lo > 0:
        hi = max(np.linalg.norm(Gr, axis=0).max() / u, 1e-300) * 2.0 + 1e-12
        g_hi, x_hi = gap(hi)
        while g_hi > 0:  # pragma: no cover - the bound above already brackets
            hi *= 2.0
            g_hi, x_hi = gap(hi)
        candidates.append(x_hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            g_mid, x_mid = gap(mid)
            if g_mid > 0:
                lo, x_lo = mid, x_mid
            else:
                hi, x_hi = mid, x_mid
        candidates.extend([x_lo, x_hi])
    vals = [wcmgda_objective(x, v, Gr, u) for x in candidates]
    return _to_simplex(candidates[int(np.argmax(vals))])


def ecal_coefficients(c, preference: Preference, state: CombinatorState) -> np.ndarray:
    """Proximal multiplier update for the ε-constraint augmented Lagrangian.

    A secondary multiplier grows by μ(c_k − ε_k) while its bound is violated
    and drops to exactly 0 once it holds. The returned vector is
    [1, multipliers] (primary first in index order) scaled onto the simplex.
    """
    c = np.asarray(c, dtype=np.float64)
    sec = preference.secondary()
    eps = np.asarray(preference.bounds)
    excess = c[sec] - eps
    state.ec_multipliers = np.where(excess >= 0, preference.mu * excess + state.ec_multipliers, 0.0)
    alpha = np.zeros(len(c))
    alpha[preference.primary_index] = 1.0
    alpha[sec] = state.ec_multipliers
    return alpha / alpha.sum()


def barrier_control(c, preference: Preference, beta: float = 1.0) -> np.ndarray:
    """φ_k = β · max(0, c_k − ε_k) for each secondary objective."""
    c = np.asarray(c, dtype=np.float64)
    return beta * np.maximum(0.0, c[preference.secondary()] - np.asarray(preference.bounds))


def ecdbgd_objective(alpha, gram, phi, secondary) -> float:
    return float(0.5 * alpha @ gram @ alpha - alpha[secondary] @ phi)


def ecdbgd_coefficients(cost_state: CostState, preference: Preference,
                        beta: float = 1.0, phi=None) -> np.ndarray:
    """Dynamic-barrier coefficients with the primary coefficient pinned to 1.

    Minimizes ½‖Cα‖² − Σ α_k φ_k over secondary α_k ≥ 0, then rescales
    [1, α_secondary] onto the simplex. Returns the unscaled solution's
    direction only; its magnitude is absorbed by the learning rate.
    """
    G = cost_state.gram
    K = G.shape[0]
    if K == 1:
        return np.ones(1)
    p = preference.primary_index
    sec = preference.secondary()
    if phi is None:
        phi = barrier_control(cost_state.costs, preference, beta)
    if not np.any(G[np.ix_(sec, sec)]):
        raise QPError("secondary score-gradients are zero")
    H = G[np.ix_(sec, sec)]
    lin = G[sec, p] - np.asarray(phi, dtype=np.float64)
    x = simplex_qp(H, lin, "nonneg")
    alpha = np.zeros(K)
    alpha[p] = 1.0
    alpha[sec] = x
    return alpha / alpha.sum()


def ecdbgd_raw(cost_state: CostState, preference: Preference, beta: float = 1.0, phi=None):
    """Unnormalized DBGD solution (primary coefficient = 1); handy for checks."""
    alpha = ecdbgd_coefficients(cost_state, preference, beta, phi)
    return alpha / alpha[preference.primary_index]


def smooth_alpha(raw_alpha, state: CombinatorState) -> np.ndarray:
    """Exponential moving average α_s ← ν·α_raw + (1 − ν)·α_s."""
    raw = np.asarray(raw_alpha, dtype=np.float64)
    if state.smoothed_alpha is None:
        out = raw.copy()
    else:
        out = state.nu * raw + (1.0 - state.nu) * state.smoothed_alpha
    out = _to_simplex(out)
    state.smoothed_alpha = out
    return out


def get_coefficients(kind, cost_state: CostState, preference: Preference,
                     state: CombinatorState) -> np.ndarray:
    """Dispatch to the coefficient rule ``kind`` and apply smoothing if enabled.

    Solver failures never propagate: EPO falls back to the previous α (LS
    weights on the first round), WC-MGDA to WC and EC-DBGD to EC-AL, each with
    an annotation on the state.
    """
    kind = Combinator(kind)
    c = cost_state.costs
    K = len(c)
    if state.initial_costs is None:
        state.initial_costs = c.copy()
    if K == 1:
        raw = np.ones(1)
    elif kind is Combinator.LS:
        raw = ls_coefficients(preference.r)
    elif kind is Combinator.SLA:
        raw = sla_coefficients(preference.r, state.rng)
    elif kind is Combinator.WC:
        shifted = c if preference.b is None else np.maximum(c - preference.b, 0.0)
        raw = wc_coefficients(shifted, preference.r)
    elif kind is Combinator.EPO:
        try:
            raw = epo_coefficients(cost_state, epo_anchor(c, preference.r, state.far_threshold))
        except (QPError, np.linalg.LinAlgError) as exc:
            state.annotate(f"EPO solver failed ({exc}); reusing previous alpha")
            prev = state.smoothed_alpha if state.smoothed_alpha is not None else state.prev_alpha
            raw = prev.copy() if prev is not None else ls_coefficients(preference.r)
    elif kind is Combinator.WC_MGDA:
        u = preference.slack
        if u is None:
            u = 0.1 * float(np.linalg.norm(preference.r * state.initial_costs))
        try:
            raw = wcmgda_coefficients(cost_state, preference.r, preference.b, u)
        except (QPError, np.linalg.LinAlgError) as exc:
            state.annotate(f"WC-MGDA solver failed ({exc}); falling back to WC")
            shifted = c if preference.b is None else np.maximum(c - preference.b, 0.0)
            raw = wc_coefficients(shifted, preference.r)
    elif kind is Combinator.EC_AL:
        raw = ecal_coefficients(c, preference, state)
    elif kind is Combinator.EC_DBGD:
        try:
            raw = ecdbgd_coefficients(cost_state, preference, state.barrier_beta)
        except (QPError, np.linalg.LinAlgError) as exc:
            state.annotate(f"EC-DBGD solver failed ({exc}); falling back to EC-AL")
            raw = ecal_coefficients(c, preference, state)
    else:  # pragma: no cover
        raise ValueError(f"unknown combinator {kind}")

    raw = _to_simplex(raw)
    state.last_raw = raw
    state.prev_alpha = raw
    state.iteration += 1
    return smooth_alpha(raw, state) if state.smoothing else raw
