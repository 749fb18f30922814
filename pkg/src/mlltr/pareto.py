"""Dominance, frontier metrics and method comparison statistics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import stats

COST = "cost"
GAIN = "gain"


def _as_cost(points, orientation: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if orientation == COST:
        return pts
    if orientation == GAIN:
        return -pts
    raise ValueError(f"orientation must be 'cost' or 'gain', got {orientation!r}")


def dominates(p, q, orientation: str = COST) -> bool:
    """Strict Pareto dominance: no worse everywhere, better somewhere."""
    p = _as_cost(p, orientation)
    q = _as_cost(q, orientation)
    if p.shape != q.shape:
        raise ValueError("points differ in dimension")
    return bool(np.all(p <= q) and np.any(p < q))


def pareto_mask(points, orientation: str = COST) -> np.ndarray:
    P = _as_cost(np.atleast_2d(points), orientation)
    le = np.all(P[:, None, :] <= P[None, :, :], axis=2)
    lt = np.any(P[:, None, :] < P[None, :, :], axis=2)
    dominated = np.any(le & lt, axis=0)  # column j dominated by some row i
    return ~dominated


def pareto_filter(points, orientation: str = COST) -> np.ndarray:
    """Non-dominated points in their original order."""
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return P[pareto_mask(P, orientation)]


def mwl(c, r) -> float:
    """Maximum weighted loss max_k r_k c_k."""
    return float(np.max(np.asarray(r, dtype=np.float64) * np.asarray(c, dtype=np.float64)))


def vno(c) -> float:
    """Volume of the box between the origin and max(c, 0)."""
    return float(np.prod(np.maximum(np.asarray(c, dtype=np.float64), 0.0)))


def compare_preference_models(c_a, c_b, r, rel_tol: float = 1e-3,
                              lower_vno_wins: bool = True) -> int:
    """-1 if model a is better, 1 if b is, 0 if indistinguishable.

    Lower MWL wins; when the MWLs agree within ``rel_tol`` (relative), the VNO
    decides, lower winning unless ``lower_vno_wins`` is False.
    """
    ma, mb = mwl(c_a, r), mwl(c_b, r)
    if abs(ma - mb) > rel_tol * max(abs(ma), abs(mb), 1e-300):
        return -1 if ma < mb else 1
    va, vb = vno(c_a), vno(c_b)
    if va == vb:
        return 0
    a_better = va < vb if lower_vno_wins else va > vb
    return -1 if a_better else 1


@dataclass
class HVIConfig:
    """Hypervolume settings.

    Points (and the reference) are divided by ``scaling`` per objective
    before measuring. Gain-oriented points are reflected into cost space.
    """

    reference_point: Sequence[float]
    scaling: Optional[Sequence[float]] = None
    orientation: str = COST
    n_samples: int = 1_000_000
    seed: int = 0


def _hv2(P: np.ndarray, ref: np.ndarray) -> float:
    order = np.lexsort((P[:, 1], P[:, 0]))
    vol, y_best = 0.0, ref[1]
    for x, y in P[order]:
        if y < y_best:
            vol += (ref[0] - x) * (y_best - y)
            y_best = y
    return float(vol)


def _hv3(P: np.ndarray, ref: np.ndarray) -> float:
    zs = np.unique(P[:, 2])
    bounds = np.append(zs, ref[2])
    vol = 0.0
    for z, z_next in zip(bounds[:-1], bounds[1:]):
        slab = P[P[:, 2] <= z][:, :2]
        vol += _hv2(slab, ref[:2]) * (z_next - z)
    return float(vol)


def _hv_mc(P: np.ndarray, ref: np.ndarray, n: int, seed: int) -> Tuple[float, float]:
    lo = P.min(axis=0)
    box = np.prod(ref - lo)
    if box == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n:
        b = min(200_000, n - done)
        U = lo + rng.random((b, P.shape[1])) * (ref - lo)
        covered = np.zeros(b, dtype=bool)
        for p in P:
            covered |= np.all(U >= p, axis=1)
        hits += int(covered.sum())
        done += b
    frac = hits / n
    return float(box * frac), float(box * np.sqrt(frac * (1 - frac) / n))


def hypervolume(points, cfg: HVIConfig, method: str = "auto") -> float:
    """Volume dominated by ``points`` and bounded by the reference point.

    Exact for K = 2 (sweep) and K = 3 (slicing along the last axis); seeded
    Monte Carlo otherwise or when ``method="mc"``.
    """
    return hypervolume_with_error(points, cfg, method)[0]


def hypervolume_with_error(points, cfg: HVIConfig, method: str = "auto") -> Tuple[float, float]:
    """Hypervolume plus its standard error (0 for the exact paths)."""
    P = _as_cost(np.atleast_2d(points), cfg.orientation).astype(np.float64)
    ref = _as_cost(cfg.reference_point, cfg.orientation).astype(np.float64)
    if P.shape[1] != ref.shape[0]:
        raise ValueError("reference point dimension mismatch")
    if cfg.scaling is not None:
        scale = np.asarray(cfg.scaling, dtype=np.float64)
        if np.any(scale <= 0):
            raise ValueError("scaling divisors must be positive")
        P = P / scale
        ref = ref / scale
    if np.any(P > ref):
        warnings.warn("points beyond the reference point were clipped", RuntimeWarning, stacklevel=2)
        P = np.minimum(P, ref)
    K = P.shape[1]
    if method == "auto":
        method = "exact" if K in (2, 3) else "mc"
    if method == "exact":
        if K == 2:
            return _hv2(P, ref), 0.0
        if K == 3:
            return _hv3(P, ref), 0.0
        if K == 1:
            return float(ref[0] - P[:, 0].min()), 0.0
        raise ValueError("exact hypervolume supports K <= 3")
    return _hv_mc(P, ref, cfg.n_samples, cfg.seed)


def default_reference(points, orientation: str = COST, margin: float = 1.01) -> np.ndarray:
    """Componentwise worst value times ``margin`` (divided, for gains)."""
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if orientation == COST:
        return P.max(axis=0) * margin
    return P.min(axis=0) / margin


def paired_t_test(sample_a, sample_b) -> Tuple[float, float]:
    """Two-sided paired t-test; returns (t statistic, p value).

    Zero-variance differences: p = 1 when all differences vanish, otherwise
    p = 0 (with a warning) and t = ±inf.
    """
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.asarray(sample_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be 1-D and paired")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs n >= 2")
    d = a - b
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 1.0
        warnings.warn("differences have zero variance; reporting p = 0", RuntimeWarning, stacklevel=2)
        return float(np.sign(mean) * np.inf), 0.0
    t = mean / (sd / np.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), df=n - 1))
    return float(t), p
