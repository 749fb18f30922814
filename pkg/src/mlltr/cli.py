"""Command line entry point: ``mlltr <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from .combinators import Preference
from .data import save_cache, write_letor
from .experiment import (ExperimentConfig, explore_from_reference, generate_epsilon_bounds,
                         generate_rays, load_datasets, parse_method, resolve_labels,
                         run_grid, single_objective_baselines)
from .gbm import TreeEnsemble, train
from .pareto import mwl
from .ranking import evaluate_costs, mean_ndcg
from .synthetic import make_conflict_dataset


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _strs(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment config (defaults: synthetic data)")
    p.add_argument("--train-file", help="LETOR training file (replaces the config's data)")
    p.add_argument("--test-file", help="LETOR test file")
    p.add_argument("--promote", type=_ints, help="feature columns to promote to labels, e.g. 3,7")
    p.add_argument("--query-fraction", type=float, help="keep this seeded fraction of queries")
    p.add_argument("--labels", type=_strs, help="label set by index or name, e.g. 0,1")
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--methods", type=_strs, help="e.g. LS,WC,WC+MA")
    p.add_argument("--n-preferences", type=int)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output-dir")


def _config(args) -> ExperimentConfig:
    d = ExperimentConfig.from_yaml(args.config).to_dict() if args.config \
        else {"data": {"synthetic": {}}}
    if args.train_file:
        d["data"] = {"train": args.train_file, "test": args.test_file,
                     "promote": args.promote or []}
    elif args.promote:
        d["data"]["promote"] = args.promote
    if args.query_fraction is not None:
        d["data"]["query_fraction"] = args.query_fraction
    if args.labels:
        d["labels"] = [[int(x) if x.isdigit() else x for x in args.labels]]
    for key in ("seeds", "methods", "n_preferences", "workers", "output_dir"):
        if getattr(args, key, None) is not None:
            d[key] = getattr(args, key)
    gbm = dict(d.get("gbm") or {})
    for key in ("n_trees", "learning_rate", "max_depth"):
        if getattr(args, key, None) is not None:
            gbm[key] = getattr(args, key)
    d["gbm"] = gbm
    return ExperimentConfig.from_dict(d)


def _selected(cfg: ExperimentConfig, seed: int):
    tr, _, te = load_datasets(cfg, seed)
    idx = resolve_labels(tr, cfg.labels[0])
    return tr.select_labels(idx), te.select_labels(idx)


def _print_rows(header, rows) -> None:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def cmd_train(args) -> int:
    cfg = _config(args)
    seed = cfg.seeds[0]
    tr, te = _selected(cfg, seed)
    kind, smooth = parse_method(args.method)
    if kind.uses_bounds:
        if args.bounds is None:
            raise SystemExit(f"{kind.value} needs --bounds")
        pref = Preference(primary_index=args.primary, bounds=tuple(args.bounds))
    else:
        w = args.weights or [1.0 / tr.label_count] * tr.label_count
        ref = tuple(args.reference) if args.reference else None
        pref = Preference(weights=tuple(w), reference=ref)
    gcfg = dataclasses.replace(cfg.gbm, smoothing=smooth, rng_seed=seed)
    ensemble, trace = train(tr, pref, kind, gcfg, cfg.loss)
    os.makedirs(cfg.output_dir, exist_ok=True)
    ensemble.save(os.path.join(cfg.output_dir, "model.json"))
    trace.save_csv(os.path.join(cfg.output_dir, "trace.csv"))
    cfg.dump(os.path.join(cfg.output_dir, "config.yaml"))
    test = evaluate_costs(ensemble, te, cfg.loss).costs
    ndcg = mean_ndcg(ensemble.predict(te.features), te, cfg.loss.ndcg_truncation or 5)
    _print_rows(["label", "train_cost", "test_cost", "test_ndcg"],
                [[n, repr(float(a)), repr(float(b)), repr(float(c))]
                 for n, a, b, c in zip(tr.label_names, trace.final_costs, test, ndcg)])
    for note in trace.annotations:
        print(f"# {note}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    _, te = _selected(cfg, cfg.seeds[0])
    ensemble = TreeEnsemble.load(args.model)
    costs = evaluate_costs(ensemble, te, cfg.loss).costs
    ndcg = mean_ndcg(ensemble.predict(te.features), te, cfg.loss.ndcg_truncation or 5)
    _print_rows(["label", "cost", "ndcg"],
                [[n, repr(float(c)), repr(float(g))] for n, c, g in zip(te.label_names, costs, ndcg)])
    if args.weights:
        print(f"mwl,{mwl(costs, args.weights)!r}")
    return 0


def cmd_grid(args) -> int:
    cfg = _config(args)
    report = run_grid(cfg)
    print(f"{len(report.results)} runs, {len(report.failed)} failed; reports in {cfg.output_dir}")
    for r in report.failed:
        s = r.spec
        print(f"FAILED {s.label_key} {s.method} seed={s.seed} pref={s.pref_index}: {r.error}",
              file=sys.stderr)
    return 0 if not report.failed else 1


def cmd_rays(args) -> int:
    if args.baselines:
        B = np.array([_floats(row) for row in args.baselines.split(";")])
        cells = [("given", None, B)]
    else:
        cfg = _config(args)
        cells = []
        for seed in cfg.seeds:
            tr, _ = _selected(cfg, seed)
            B, _ = single_objective_baselines(tr, cfg.gbm, cfg.loss)
            cells.append(("|".join(tr.label_names), seed, B))
    rows = []
    n = args.n
    for key, seed, B in cells:
        if args.bounds:
            for i, eps in enumerate(generate_epsilon_bounds(B, args.primary, n)):
                rows.append([key, seed, i, "bounds"] + [repr(float(e)) for e in eps])
        else:
            for i, r in enumerate(generate_rays(B, n)):
                rows.append([key, seed, i, "weights"] + [repr(float(x)) for x in r])
    _print_rows(["labels", "seed", "index", "kind", "values..."], rows)
    return 0


def cmd_explore_ref(args) -> int:
    cfg = _config(args)
    if args.methods:
        cfg.reference_methods = args.methods
    if args.reference_trees is not None:
        cfg.reference_trees = args.reference_trees
    ref = TreeEnsemble.load(args.reference) if args.reference else None
    report = explore_from_reference(cfg, ref)
    _print_rows(["labels", "method", "n_runs", "dominating_fraction", "mean_mwl_vs_reference"],
                [[s["labels"], s["method"], s["n_runs"], repr(s["dominating_fraction"]),
                  repr(s["mean_mwl_vs_reference"])] for s in report.summary])
    return 0 if not report.failed else 1


def cmd_synth_gen(args) -> int:
    tr, te = make_conflict_dataset(seed=args.seed, n_queries=args.n_queries,
                                   n_test_queries=args.n_test_queries)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, ds in (("train", tr), ("test", te)):
        save_cache(ds, os.path.join(args.out_dir, f"{name}.mltr"))
        # LETOR carries one label: y1 is the label, y2 rides along as the last feature
        flat = type(ds)(np.hstack([ds.features, ds.labels[:, 1:]]), ds.labels[:, :1],
                        ds.query_offsets, ds.query_ids, ds.label_names[:1])
        with open(os.path.join(args.out_dir, f"{name}.txt"), "w", encoding="utf-8") as fh:
            write_letor(flat, fh)
    print(f"wrote train/test (.txt, .mltr) to {args.out_dir}; "
          f"promote feature index {tr.feature_dim} to recover y2 from the .txt files")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlltr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model")
    _add_common(p)
    p.add_argument("--method", default="LS")
    p.add_argument("--weights", type=_floats, help="priority vector r")
    p.add_argument("--bounds", type=_floats, help="ε bounds for the secondary objectives")
    p.add_argument("--primary", type=int, default=0)
    p.add_argument("--reference", type=_floats, help="reference cost vector b")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="costs and NDCG of a saved model on the test data")
    _add_common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--weights", type=_floats, help="also report MWL for this r")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="run the experiment grid")
    _add_common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("rays", help="print preference rays or ε-bounds")
    _add_common(p)
    p.add_argument("--baselines", help="baseline cost rows, e.g. '1,3;3,1' (skips training)")
    p.add_argument("-n", type=int, default=5)
    p.add_argument("--bounds", action="store_true", help="emit ε-bounds instead of rays")
    p.add_argument("--primary", type=int, default=0)
    p.set_defaults(func=cmd_rays)

    p = sub.add_parser("explore-ref", help="explore trade-offs around a reference model")
    _add_common(p)
    p.add_argument("--reference", help="reference model JSON (default: under-trained LS)")
    p.add_argument("--reference-trees", type=int)
    p.set_defaults(func=cmd_explore_ref)

    p = sub.add_parser("synth-gen", help="write the synthetic conflict dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-queries", type=int, default=200)
    p.add_argument("--n-test-queries", type=int, default=100)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth_gen)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
