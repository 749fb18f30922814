"""Experiment grids: baselines, preference rays, ε-bounds, batch runs and reports."""
from __future__ import annotations

import csv
import dataclasses
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from .combinators import Combinator, Preference
from .data import (LabelPromotionSpec, MultiLabelDataset, load_cache, load_letor, promote_labels,
                   sample_query_ids)
from .gbm import GBMConfig, TreeEnsemble, train
from .pareto import (COST, GAIN, HVIConfig, default_reference, hypervolume, mwl, paired_t_test,
                     vno)
from .ranking import LossConfig, evaluate_costs, mean_ndcg
from .synthetic import make_conflict_dataset

logger = logging.getLogger(__name__)

MA_SUFFIX = "+MA"
HVI_MARGIN = 1.01


# -- preference generation ----------------------------------------------------

def single_objective_baselines(dataset: MultiLabelDataset, gbm_cfg: GBMConfig = GBMConfig(),
                               loss_cfg: LossConfig = LossConfig()):
    """One LS run per label with r = e_k.

    Returns ``(costs, ensembles)``; row k of the (K, K) ``costs`` array is the
    full train cost vector of baseline k.
    """
    K = dataset.label_count
    costs, models = [], []
    cfg = dataclasses.replace(gbm_cfg, smoothing=False)
    for k in range(K):
        ensemble, trace = train(dataset, Preference(weights=tuple(np.eye(K)[k])),
                                Combinator.LS, cfg, loss_cfg)
        costs.append(trace.final_costs)
        models.append(ensemble)
    return np.array(costs), models


def _normalize(r: np.ndarray) -> np.ndarray:
    return r / r.sum()


def _barycentric_interior(n: int) -> np.ndarray:
    """``n`` interior barycentric weights from the coarsest grid holding n points."""
    m = 3
    while (m - 1) * (m - 2) // 2 < n:
        m += 1
    pts = [(i, j, m - i - j) for i in range(1, m) for j in range(1, m - i) if m - i - j >= 1]
    pts = np.array(pts, dtype=np.float64) / m
    keep = np.round(np.linspace(0, len(pts) - 1, n)).astype(int)
    return pts[keep]


def generate_rays(baseline_costs, n: int) -> np.ndarray:
    """``n`` priority vectors whose r⁻¹ rays lie between the baselines.

    K = 2: directions at equal angular spacing strictly between the two
    baseline cost vectors, sorted by angle. K = 3: normalized barycentric
    blends of the three baseline directions. Each r is 1/d scaled to sum to 1.
    """
    B = np.atleast_2d(np.asarray(baseline_costs, dtype=np.float64))
    K = B.shape[1]
    if n < 1:
        raise ValueError("n must be >= 1")
    if B.shape[0] != K or K not in (2, 3):
        raise ValueError("need a (K, K) baseline cost matrix with K in {2, 3}")
    if np.any(B < 0) or not np.all(B.sum(axis=1) > 0):
        raise ValueError("baseline costs must be nonnegative and nonzero")
    D = B / np.linalg.norm(B, axis=1, keepdims=True)
    if np.linalg.matrix_rank(D, tol=1e-9) < K:
        warnings.warn("baseline cost vectors are colinear; using uniform simplex weights",
                      RuntimeWarning, stacklevel=2)
        if K == 2:
            w = np.arange(1, n + 1) / (n + 1)
            return np.column_stack([w, 1 - w])
        return _barycentric_interior(n)
    if K == 2:
        angles = np.sort(np.arctan2(B[:, 1], B[:, 0]))
        theta = angles[0] + (angles[1] - angles[0]) * np.arange(1, n + 1) / (n + 1)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
    else:
        dirs = _barycentric_interior(n) @ D
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.array([_normalize(1.0 / d) for d in dirs])


def generate_epsilon_bounds(baseline_costs, k_p: int, n: int) -> List[Tuple[float, ...]]:
    """``n`` bound sets, the i-th at i/(n+1) of each secondary's baseline cost.

    ``baseline_costs`` is a cost vector or the (K, K) baseline matrix; for the
    matrix the costs of the primary's own baseline (row ``k_p``) are used,
    i.e. how large each secondary grows when it is ignored.
    """
    B = np.asarray(baseline_costs, dtype=np.float64)
    c = B[k_p] if B.ndim == 2 else B
    K = len(c)
    if not 0 <= k_p < K:
        raise ValueError("primary index out of range")
    if n < 1:
        raise ValueError("n must be >= 1")
    sec = [k for k in range(K) if k != k_p]
    return [tuple(float(i / (n + 1) * c[k]) for k in sec) for i in range(1, n + 1)]


# -- configuration ------------------------------------------------------------

def _dc_from_dict(cls, d: Optional[dict]):
    d = dict(d or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**d)


@dataclass
class DataConfig:
    """Where the data comes from: synthetic generator settings or LETOR files."""

    synthetic: Optional[Dict[str, Any]] = None
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    promote: List[int] = field(default_factory=list)
    promote_names: Optional[List[str]] = None
    keep_original_label: bool = True
    n_levels: int = 5
    query_fraction: float = 1.0
    subsample_seed: int = 0

    def __post_init__(self):
        if (self.synthetic is None) == (self.train is None):
            raise ValueError("data needs exactly one of 'synthetic' or 'train'")
        if not 0 < self.query_fraction <= 1:
            raise ValueError("query_fraction must be in (0, 1]")


@dataclass
class ExperimentConfig:
    """A grid over label sets × methods × preferences × seeds.

    Methods are combinator names with an optional ``+MA`` suffix for
    smoothing. For synthetic data the seed also drives data generation.
    """

    data: DataConfig
    labels: List[List[Any]] = field(default_factory=lambda: [[0, 1]])
    methods: List[str] = field(default_factory=lambda: ["LS", "WC", "WC+MA"])
    n_preferences: int = 5
    seeds: List[int] = field(default_factory=lambda: [0])
    primary_index: int = 0
    gbm: GBMConfig = field(default_factory=GBMConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    output_dir: str = "results"
    workers: int = 1
    save_traces: bool = True
    reference_trees: int = 50
    reference_methods: List[str] = field(default_factory=lambda: ["WC+MA", "WC-MGDA+MA"])

    def __post_init__(self):
        if self.n_preferences < 1:
            raise ValueError("n_preferences must be >= 1")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if not self.labels:
            raise ValueError("at least one label set is required")
        for m in list(self.methods) + list(self.reference_methods):
            parse_method(m)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["data"] = _dc_from_dict(DataConfig, d.get("data"))
        d["gbm"] = _dc_from_dict(GBMConfig, d.get("gbm"))
        d["loss"] = _dc_from_dict(LossConfig, d.get("loss"))
        return _dc_from_dict(cls, d)

    @classmethod
    def from_yaml(cls, path: str) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(yaml.safe_load(fh) or {})

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)


def parse_method(name: str) -> Tuple[Combinator, bool]:
    smooth = name.endswith(MA_SUFFIX)
    base = name[: -len(MA_SUFFIX)] if smooth else name
    try:
        return Combinator(base), smooth
    except ValueError:
        raise ValueError(f"unknown method {name!r}") from None


def load_datasets(cfg: ExperimentConfig, seed: int):
    """(train, valid, test) for one seed; valid may be None."""
    dc = cfg.data
    if dc.synthetic is not None:
        tr, te = make_conflict_dataset(seed=seed, **dc.synthetic)
        return tr, None, te

    def load(path):
        if path is None:
            return None
        if path.endswith(".mltr"):
            ds = load_cache(path)
            if dc.query_fraction < 1:
                keep = set(sample_query_ids(ds.query_ids, dc.query_fraction, dc.subsample_seed))
                ds = ds.select_queries([q for q, qid in enumerate(ds.query_ids) if qid in keep])
        else:
            ds = load_letor(path, query_fraction=dc.query_fraction, seed=dc.subsample_seed)
        if dc.promote:
            spec = LabelPromotionSpec(dc.promote, dc.keep_original_label, dc.promote_names)
            ds = promote_labels(ds, spec, dc.n_levels)
        return ds

    tr = load(dc.train)
    return tr, load(dc.valid), load(dc.test) if dc.test else tr


def resolve_labels(dataset: MultiLabelDataset, label_set: Sequence[Any]) -> List[int]:
    out = []
    for lab in label_set:
        if isinstance(lab, str):
            if lab not in dataset.label_names:
                raise ValueError(f"unknown label {lab!r}")
            out.append(dataset.label_names.index(lab))
        else:
            if not 0 <= int(lab) < dataset.label_count:
                raise ValueError(f"label index {lab} out of range")
            out.append(int(lab))
    if len(set(out)) != len(out):
        raise ValueError("label set has duplicates")
    return out


# -- runs ----------------------------------------------------------------------

@dataclass
class RunSpec:
    label_key: str
    method: str
    pref_index: int
    seed: int
    preference: Preference


@dataclass
class RunResult:
    spec: RunSpec
    status: str = "ok"
    error: str = ""
    train_costs: Optional[np.ndarray] = None
    test_costs: Optional[np.ndarray] = None
    test_ndcg: Optional[np.ndarray] = None
    n_rounds: int = 0
    fallbacks: int = 0
    trace_csv: str = ""
    ensemble: Optional[TreeEnsemble] = None
    trace: Any = None


def _pref_text(p: Preference) -> str:
    vals = p.weights if p.is_priority else p.bounds
    return ";".join(repr(float(v)) for v in vals)


def execute_run(spec: RunSpec, train_ds: MultiLabelDataset, test_ds: MultiLabelDataset,
                gbm_cfg: GBMConfig, loss_cfg: LossConfig, keep_model: bool = False) -> RunResult:
    """Train one model; failures are captured in the result."""
    kind, smooth = parse_method(spec.method)
    cfg = dataclasses.replace(gbm_cfg, smoothing=smooth, rng_seed=spec.seed)
    res = RunResult(spec)
    try:
        ensemble, trace = train(train_ds, spec.preference, kind, cfg, loss_cfg)
        res.train_costs = trace.final_costs
        res.test_costs = evaluate_costs(ensemble, test_ds, loss_cfg).costs
        res.test_ndcg = mean_ndcg(ensemble.predict(test_ds.features), test_ds,
                                  loss_cfg.ndcg_truncation or 5)
        res.n_rounds = trace.n_rounds
        res.fallbacks = len(trace.annotations)
        res.trace = trace
        if keep_model:
            res.ensemble = ensemble
    except Exception as exc:  # noqa: BLE001 - a failed row, the grid goes on
        logger.warning("run %s/%s/%d/%d failed: %s", spec.label_key, spec.method,
                       spec.pref_index, spec.seed, exc)
        res.status = "failed"
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def _job(args):
    return execute_run(*args)


def _run_all(jobs, workers: int) -> List[RunResult]:
    if workers == 1 or len(jobs) <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs, chunksize=1))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def _preferences(kind: Combinator, baselines: np.ndarray, n: int, primary: int,
                 reference=None) -> List[Preference]:
    if kind.uses_bounds:
        return [Preference(primary_index=primary, bounds=eps)
                for eps in generate_epsilon_bounds(baselines, primary, n)]
    ref = None if reference is None else tuple(float(x) for x in reference)
    return [Preference(weights=tuple(float(x) for x in r), reference=ref)
            for r in generate_rays(baselines, n)]


@dataclass
class GridReport:
    results: List[RunResult]
    baselines: Dict[Tuple[str, int], np.ndarray]
    hvi: List[dict]
    aggregate: List[dict]
    files: Dict[str, str] = field(default_factory=dict)

    @property
    def failed(self) -> List[RunResult]:
        return [r for r in self.results if r.status != "ok"]


def _label_key(names: Sequence[str]) -> str:
    return "|".join(names)


def _sort_key(res: RunResult):
    s = res.spec
    return (s.label_key, s.method, s.seed, s.pref_index)


def hvi_settings(baselines: np.ndarray, points) -> Tuple[np.ndarray, np.ndarray]:
    """(reference point, scaling) for train-cost HVI of one (labels, seed) cell.

    Each objective is divided by its worst single-objective baseline cost;
    the reference is the componentwise worst of all compared models, 1%
    further out.
    """
    P = np.vstack([np.atleast_2d(points), baselines])
    return default_reference(P, COST, HVI_MARGIN), baselines.max(axis=0)


def run_grid(cfg: ExperimentConfig, write: bool = True, keep_models: bool = False) -> GridReport:
    """Run every (label set, method, preference, seed) cell and write reports.

    Baselines and preference sets are derived per (label set, seed). Results
    are sorted before aggregation so the output does not depend on the
    worker count.
    """
    out = cfg.output_dir
    if write:
        os.makedirs(out, exist_ok=True)
        cfg.dump(os.path.join(out, "config.yaml"))
    jobs, baselines = [], {}
    K_max = 1
    for seed in cfg.seeds:
        tr_full, _, te_full = load_datasets(cfg, seed)
        for label_set in cfg.labels:
            idx = resolve_labels(tr_full, label_set)
            tr, te = tr_full.select_labels(idx), te_full.select_labels(idx)
            key = _label_key(tr.label_names)
            K_max = max(K_max, len(idx))
            base, _ = single_objective_baselines(tr, cfg.gbm, cfg.loss)
            baselines[(key, seed)] = base
            for method in cfg.methods:
                kind, _ = parse_method(method)
                for i, pref in enumerate(_preferences(kind, base, cfg.n_preferences,
                                                      cfg.primary_index)):
                    jobs.append((RunSpec(key, method, i, seed, pref), tr, te, cfg.gbm, cfg.loss,
                                 keep_models))
    results = sorted(_run_all(jobs, cfg.workers), key=_sort_key)
    hvi_rows = _hvi_table(results, baselines)
    agg = _aggregate(results, hvi_rows, cfg.methods)
    report = GridReport(results, baselines, hvi_rows, agg)
    if write:
        report.files = _write_reports(report, out, K_max, cfg.save_traces)
    return report


def _hvi_table(results: List[RunResult], baselines) -> List[dict]:
    cells: Dict[Tuple[str, str, int], List[RunResult]] = {}
    for r in results:
        if r.status == "ok":
            cells.setdefault((r.spec.label_key, r.spec.method, r.spec.seed), []).append(r)
    # one reference point per (labels, seed), shared by every method compared there
    refs = {}
    for key, seed in {(k, s) for k, _, s in cells}:
        rs = [r for (k, _, s), group in cells.items() if (k, s) == (key, seed) for r in group]
        refs[(key, seed)] = (
            hvi_settings(baselines[(key, seed)], [r.train_costs for r in rs]),
            default_reference([r.test_ndcg for r in rs], GAIN, HVI_MARGIN),
        )
    rows = []
    for (key, method, seed), rs in sorted(cells.items()):
        (ref, scale), ndcg_ref = refs[(key, seed)]
        h_cost = hypervolume([r.train_costs for r in rs], HVIConfig(ref, scale, COST))
        h_ndcg = hypervolume([r.test_ndcg for r in rs], HVIConfig(ndcg_ref, None, GAIN))
        rows.append({"labels": key, "method": method, "seed": seed, "n_runs": len(rs),
                     "hvi_train_cost": h_cost, "hvi_test_ndcg": h_ndcg})
    return rows


def _pairings(methods: Sequence[str]) -> List[Tuple[str, str, str]]:
    """(row name, orig method, ma method); SLA pairs with LS."""
    present = set(methods)
    pairs = []
    seen = set()
    for m in methods:
        kind, smooth = parse_method(m)
        if kind is Combinator.SLA or kind is Combinator.LS:
            if "SLA" in present and "LS" in present and "SLA/LS" not in seen:
                pairs.append(("SLA/LS", "SLA", "LS"))
                seen.add("SLA/LS")
            continue
        if kind.value in seen:
            continue
        orig, ma = kind.value, kind.value + MA_SUFFIX
        if orig in present and ma in present:
            pairs.append((kind.value, orig, ma))
            seen.add(kind.value)
    return pairs


def _gain_pct(orig: float, ma: float) -> Optional[float]:
    return None if orig == 0 else (ma - orig) / orig * 100.0


def _compare(rows, label_key, name, metric, a: Dict, b: Dict):
    common = sorted(set(a) & set(b))
    if not common:
        return
    xa = np.array([a[k] for k in common])
    xb = np.array([b[k] for k in common])
    t = p = None
    if len(common) >= 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            t, p = paired_t_test(xb, xa)
    orig, ma = float(xa.mean()), float(xb.mean())
    rows.append({"labels": label_key, "method": name, "metric": metric, "orig": orig, "ma": ma,
                 "gain_pct": _gain_pct(orig, ma), "t_stat": t, "p_value": p, "n": len(common)})


def _aggregate(results: List[RunResult], hvi_rows: List[dict], methods) -> List[dict]:
    """Orig-vs-MA comparisons in the layout of a results table.

    MWL (test costs, priority methods) is paired over (preference, seed);
    HVI over seeds. Gain% is (ma − orig)/orig · 100.
    """
    rows: List[dict] = []
    keys = sorted({r.spec.label_key for r in results})
    for key in keys:
        for name, orig, ma in _pairings(methods):
            def mwl_map(method):
                return {(r.spec.pref_index, r.spec.seed): mwl(r.test_costs, r.spec.preference.r)
                        for r in results if r.status == "ok" and r.spec.label_key == key
                        and r.spec.method == method and r.spec.preference.is_priority}

            def hvi_map(method, col):
                return {h["seed"]: h[col] for h in hvi_rows
                        if h["labels"] == key and h["method"] == method}

            if not parse_method(orig)[0].uses_bounds:
                _compare(rows, key, name, "MWL", mwl_map(orig), mwl_map(ma))
            _compare(rows, key, name, "HVI_train_cost", hvi_map(orig, "hvi_train_cost"),
                     hvi_map(ma, "hvi_train_cost"))
            _compare(rows, key, name, "HVI_test_ndcg", hvi_map(orig, "hvi_test_ndcg"),
                     hvi_map(ma, "hvi_test_ndcg"))
    return rows


RUN_COLUMNS = ["labels", "method", "seed", "pref_index", "preference", "status", "error",
               "n_rounds", "fallbacks", "mwl_train", "mwl_test", "vno_test"]


def _run_row(r: RunResult, K_max: int) -> List[str]:
    s = r.spec
    ok = r.status == "ok"
    pri = s.preference.is_priority
    row = [s.label_key, s.method, s.seed, s.pref_index, _pref_text(s.preference), r.status,
           r.error, r.n_rounds if ok else "", r.fallbacks if ok else "",
           mwl(r.train_costs, s.preference.r) if ok and pri else None,
           mwl(r.test_costs, s.preference.r) if ok and pri else None,
           vno(r.test_costs) if ok else None]
    for arr in (r.train_costs, r.test_costs, r.test_ndcg):
        vals = list(arr) if ok else []
        row += [vals[k] if k < len(vals) else None for k in range(K_max)]
    return [_fmt(v) for v in row]


def _write_csv(path: str, header: List[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _write_reports(report: GridReport, out: str, K_max: int, save_traces: bool) -> Dict[str, str]:
    files = {}
    header = RUN_COLUMNS + [f"{part}_{k + 1}" for part in ("train_cost", "test_cost", "test_ndcg")
                            for k in range(K_max)]
    files["runs"] = os.path.join(out, "runs.csv")
    _write_csv(files["runs"], header,
               (_run_row(r, K_max) for r in report.results if r.status == "ok"))
    files["failures"] = os.path.join(out, "failures.csv")
    _write_csv(files["failures"], ["labels", "method", "seed", "pref_index", "preference", "error"],
               ([r.spec.label_key, r.spec.method, r.spec.seed, r.spec.pref_index,
                 _pref_text(r.spec.preference), r.error] for r in report.failed))

    files["baselines"] = os.path.join(out, "baselines.csv")
    brows = []
    for (key, seed), B in sorted(report.baselines.items()):
        for k, c in enumerate(B):
            brows.append([key, seed, k] + [_fmt(float(v)) for v in c]
                         + [""] * (K_max - len(c)))
    _write_csv(files["baselines"], ["labels", "seed", "baseline"]
               + [f"train_cost_{k + 1}" for k in range(K_max)], brows)

    hcols = ["labels", "method", "seed", "n_runs", "hvi_train_cost", "hvi_test_ndcg"]
    files["hvi"] = os.path.join(out, "hvi.csv")
    _write_csv(files["hvi"], hcols, ([_fmt(h[c]) for c in hcols] for h in report.hvi))

    acols = ["labels", "method", "metric", "orig", "ma", "gain_pct", "t_stat", "p_value", "n"]
    files["aggregate"] = os.path.join(out, "aggregate.csv")
    _write_csv(files["aggregate"], acols, ([_fmt(a[c]) for c in acols] for a in report.aggregate))

    if save_traces:
        tdir = os.path.join(out, "traces")
        os.makedirs(tdir, exist_ok=True)
        for r in report.results:
            if r.trace is None:
                continue
            s = r.spec
            name = f"{s.label_key}_{s.method}_s{s.seed}_p{s.pref_index}.csv".replace("|", "-")
            r.trace_csv = os.path.join(tdir, name)
            r.trace.save_csv(r.trace_csv)
    return files


# -- reference-model exploration --------------------------------------------------

@dataclass
class ReferenceReport:
    reference_costs: Dict[Tuple[str, int], np.ndarray]
    results: List[RunResult]
    summary: List[dict]
    files: Dict[str, str] = field(default_factory=dict)

    @property
    def failed(self) -> List[RunResult]:
        return [r for r in self.results if r.status != "ok"]


def strictly_dominates_reference(c, b) -> bool:
    """Better than the reference on every objective."""
    return bool(np.all(np.asarray(c) < np.asarray(b)))


def mwl_vs_reference(c, r, b) -> float:
    return float(np.max(np.asarray(r) * (np.asarray(c) - np.asarray(b))))


def train_reference(dataset: MultiLabelDataset, cfg: ExperimentConfig) -> TreeEnsemble:
    """An under-trained equal-weight LS model standing in for a production ranker."""
    K = dataset.label_count
    gcfg = dataclasses.replace(cfg.gbm, n_trees=cfg.reference_trees, smoothing=False)
    ensemble, _ = train(dataset, Preference(weights=tuple([1.0 / K] * K)), Combinator.LS,
                        gcfg, cfg.loss)
    return ensemble


def explore_from_reference(cfg: ExperimentConfig, reference_ensemble: Optional[TreeEnsemble] = None,
                           preferences: Optional[Sequence[Sequence[float]]] = None,
                           write: bool = True) -> ReferenceReport:
    """Train reference-aware methods across preference rays around a reference model.

    The reference train costs b shift the trade-off targets. Rays come from
    :func:`generate_rays` applied to the reference's axis projections
    diag(b), unless ``preferences`` gives them explicitly. Without a
    ``reference_ensemble`` one is trained per seed by :func:`train_reference`.
    """
    if preferences is not None and len(preferences) == 0:
        raise ValueError("preference list is empty")
    methods = list(cfg.reference_methods)
    for m in methods:
        kind, _ = parse_method(m)
        if kind not in (Combinator.WC, Combinator.WC_MGDA):
            raise ValueError(f"{m} does not take a reference point")
    jobs, refs = [], {}
    for seed in cfg.seeds:
        tr_full, _, te_full = load_datasets(cfg, seed)
        for label_set in cfg.labels:
            idx = resolve_labels(tr_full, label_set)
            tr, te = tr_full.select_labels(idx), te_full.select_labels(idx)
            key = _label_key(tr.label_names)
            ref_model = reference_ensemble if reference_ensemble is not None \
                else train_reference(tr, cfg)
            b = evaluate_costs(ref_model, tr, cfg.loss).costs
            refs[(key, seed)] = b
            rays = np.asarray(preferences, dtype=np.float64) if preferences is not None \
                else generate_rays(np.diag(b), cfg.n_preferences)
            for method in methods:
                for i, r in enumerate(rays):
                    pref = Preference(weights=tuple(float(x) for x in r),
                                      reference=tuple(float(x) for x in b))
                    jobs.append((RunSpec(key, method, i, seed, pref), tr, te, cfg.gbm, cfg.loss,
                                 False))
    results = sorted(_run_all(jobs, cfg.workers), key=_sort_key)

    summary = []
    for key in sorted({r.spec.label_key for r in results}):
        for method in methods:
            rs = [r for r in results if r.spec.label_key == key and r.spec.method == method
                  and r.status == "ok"]
            if not rs:
                continue
            dom = [strictly_dominates_reference(r.train_costs, refs[(key, r.spec.seed)]) for r in rs]
            mw = [mwl_vs_reference(r.train_costs, r.spec.preference.r, refs[(key, r.spec.seed)])
                  for r in rs]
            gains = np.mean([refs[(key, r.spec.seed)] - r.train_costs for r in rs], axis=0)
            summary.append({"labels": key, "method": method, "n_runs": len(rs),
                            "dominating_fraction": float(np.mean(dom)),
                            "mean_mwl_vs_reference": float(np.mean(mw)),
                            "mean_improvement": ";".join(repr(float(g)) for g in gains)})
    report = ReferenceReport(refs, results, summary)
    if write:
        out = cfg.output_dir
        os.makedirs(out, exist_ok=True)
        cfg.dump(os.path.join(out, "config.yaml"))
        K_max = max(len(b) for b in refs.values())
        rows = []
        for r in results:
            b = refs[(r.spec.label_key, r.spec.seed)]
            ok = r.status == "ok"
            row = [r.spec.label_key, r.spec.method, r.spec.seed, r.spec.pref_index,
                   _pref_text(r.spec.preference), r.status, r.error,
                   int(strictly_dominates_reference(r.train_costs, b)) if ok else "",
                   mwl_vs_reference(r.train_costs, r.spec.preference.r, b) if ok else None]
            imp = list(b - r.train_costs) if ok else []
            row += [imp[k] if k < len(imp) else None for k in range(K_max)]
            rows.append([_fmt(v) for v in row])
        report.files["runs"] = os.path.join(out, "reference_runs.csv")
        _write_csv(report.files["runs"],
                   ["labels", "method", "seed", "pref_index", "preference", "status", "error",
                    "dominates_reference", "mwl_vs_reference"]
                   + [f"improvement_{k + 1}" for k in range(K_max)], rows)
        scols = ["labels", "method", "n_runs", "dominating_fraction", "mean_mwl_vs_reference",
                 "mean_improvement"]
        report.files["summary"] = os.path.join(out, "reference_summary.csv")
        _write_csv(report.files["summary"], scols,
                   ([_fmt(s[c]) for c in scols] for s in summary))
    return report
