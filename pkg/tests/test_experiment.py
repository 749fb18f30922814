import csv
import os

import numpy as np
import pytest

import mlltr.experiment as exp
from mlltr.data import MultiLabelDataset, save_cache
from mlltr.experiment import (ExperimentConfig, explore_from_reference, generate_epsilon_bounds,
                              generate_rays, mwl_vs_reference, parse_method, run_grid)
from mlltr.gbm import GBMConfig, train
from mlltr.combinators import Preference
from mlltr.pareto import mwl
from mlltr.synthetic import make_conflict_dataset

TINY = {"synthetic": {"n_queries": 12, "n_test_queries": 6, "n_items": 8}}


def tiny_cfg(tmp_path, **kw):
    d = {"data": TINY, "methods": ["LS"], "n_preferences": 1, "seeds": [0],
         "gbm": {"n_trees": 4, "learning_rate": 20}, "output_dir": str(tmp_path / "out"),
         "reference_trees": 2}
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def ray_angles(R):
    D = 1.0 / np.asarray(R)
    return np.arctan2(D[:, 1], D[:, 0])


def test_rays_between_axes_single_is_diagonal():
    r = generate_rays(np.eye(2), 1)
    np.testing.assert_allclose(r, [[0.5, 0.5]])


def test_rays_between_symmetric_baselines():
    R = generate_rays([[1.0, 3.0], [3.0, 1.0]], 5)
    th = ray_angles(R)
    lo, hi = np.arctan(1 / 3), np.arctan(3)
    assert np.all(th > lo) and np.all(th < hi)
    gaps = np.diff(th)
    assert np.all(gaps > 0)
    np.testing.assert_allclose(gaps, gaps[0], atol=1e-9)
    assert th[2] == pytest.approx(np.pi / 4)
    assert np.all(R > 0) and len({tuple(r) for r in R}) == 5
    np.testing.assert_allclose(R.sum(axis=1), 1.0)


def test_rays_three_objectives_and_colinear_fallback():
    R = generate_rays(np.array([[1.0, 4, 4], [4, 1, 4], [4, 4, 1]]), 4)
    assert R.shape == (4, 3) and np.all(R > 0)
    with pytest.warns(RuntimeWarning):
        U = generate_rays([[1.0, 2.0], [2.0, 4.0]], 3)
    np.testing.assert_allclose(U, [[0.25, 0.75], [0.5, 0.5], [0.75, 0.25]])
    with pytest.raises(ValueError):
        generate_rays([[1.0, -1.0], [0.0, 1.0]], 2)


def test_epsilon_bounds():
    assert generate_epsilon_bounds([3.0, 4.0], 0, 1) == [(2.0,)]
    assert generate_epsilon_bounds([9.0, 4.0], 0, 3) == [(1.0,), (2.0,), (3.0,)]
    B = np.array([[1.0, 6.0, 3.0], [5.0, 1.0, 2.0], [4.0, 4.0, 1.0]])
    eps = generate_epsilon_bounds(B, 1, 2)
    np.testing.assert_allclose(eps, [(5 / 3, 2 / 3), (10 / 3, 4 / 3)])


def test_parse_method():
    kind, smooth = parse_method("WC-MGDA+MA")
    assert kind.value == "WC-MGDA" and smooth
    assert parse_method("EPO")[1] is False
    with pytest.raises(ValueError):
        parse_method("XYZ")


def test_config_yaml_round_trip(tmp_path):
    cfg = tiny_cfg(tmp_path, methods=["WC", "WC+MA"])
    path = tmp_path / "c.yaml"
    cfg.dump(str(path))
    assert ExperimentConfig.from_yaml(str(path)) == cfg
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"data": TINY, "bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"data": {}})


def test_single_cell_grid(tmp_path):
    rep = run_grid(tiny_cfg(tmp_path))
    rows = read_csv(rep.files["runs"])
    assert len(rows) == 1 and rows[0]["status"] == "ok"
    assert os.path.exists(os.path.join(str(tmp_path / "out"), "config.yaml"))
    assert len(os.listdir(str(tmp_path / "out" / "traces"))) == 1


def test_grid_rows_pairing_and_mwl_consistency(tmp_path):
    cfg = tiny_cfg(tmp_path, methods=["LS", "SLA", "WC", "WC+MA", "EC-AL"], n_preferences=2,
                   seeds=[0, 1])
    rep = run_grid(cfg)
    rows = read_csv(rep.files["runs"])
    assert len(rows) == 5 * 2 * 2
    agg = read_csv(rep.files["aggregate"])
    assert {(a["method"], a["metric"]) for a in agg} >= {("SLA/LS", "MWL"), ("WC", "MWL"),
                                                         ("WC", "HVI_train_cost")}
    sla = next(a for a in agg if a["method"] == "SLA/LS" and a["metric"] == "MWL")
    mwl_of = lambda m: np.mean([float(r["mwl_test"]) for r in rows if r["method"] == m])
    assert float(sla["orig"]) == pytest.approx(mwl_of("SLA"))
    assert float(sla["ma"]) == pytest.approx(mwl_of("LS"))
    for r in rows:
        if r["method"] == "EC-AL":
            assert r["mwl_test"] == ""
            continue
        w = [float(x) for x in r["preference"].split(";")]
        c = [float(r["test_cost_1"]), float(r["test_cost_2"])]
        assert float(r["mwl_test"]) == mwl(c, w)
    assert len(read_csv(rep.files["baselines"])) == 2 * 2
    assert len(read_csv(rep.files["hvi"])) == 5 * 2


def test_failed_runs_are_listed(tmp_path, monkeypatch):
    real = exp.train

    def flaky(ds, pref, kind, *a, **k):
        if kind.value == "EPO":
            raise RuntimeError("boom")
        return real(ds, pref, kind, *a, **k)

    monkeypatch.setattr(exp, "train", flaky)
    rep = run_grid(tiny_cfg(tmp_path, methods=["LS", "EPO"], n_preferences=2))
    assert len(rep.failed) == 2
    assert len(read_csv(rep.files["runs"])) == 2
    fails = read_csv(rep.files["failures"])
    assert [f["method"] for f in fails] == ["EPO", "EPO"]
    assert "boom" in fails[0]["error"]


def test_grid_output_is_deterministic_across_workers(tmp_path):
    a = run_grid(tiny_cfg(tmp_path / "a", methods=["SLA", "LS", "WC", "WC+MA"], n_preferences=2))
    b = run_grid(tiny_cfg(tmp_path / "b", methods=["SLA", "LS", "WC", "WC+MA"], n_preferences=2,
                          workers=2))
    for name in ("runs", "aggregate", "hvi"):
        with open(a.files[name], "rb") as fa, open(b.files[name], "rb") as fb:
            assert fa.read() == fb.read()


def test_explore_requires_preferences(tmp_path):
    with pytest.raises(ValueError):
        explore_from_reference(tiny_cfg(tmp_path), preferences=[])
    with pytest.raises(ValueError):
        explore_from_reference(tiny_cfg(tmp_path, reference_methods=["LS"]))


def test_explore_writes_reports(tmp_path):
    rep = explore_from_reference(tiny_cfg(tmp_path, n_preferences=2))
    assert not rep.failed
    runs = read_csv(rep.files["runs"])
    assert len(runs) == 2 * 2
    summary = read_csv(rep.files["summary"])
    assert [s["method"] for s in summary] == ["WC+MA", "WC-MGDA+MA"]
    b = rep.reference_costs[("y1|y2", 0)]
    for r in rep.results:
        assert float(next(x for x in runs if x["method"] == r.spec.method
                          and int(x["pref_index"]) == r.spec.pref_index)["mwl_vs_reference"]) \
            == mwl_vs_reference(r.train_costs, r.spec.preference.r, b)


def test_optimal_reference_on_agreeing_labels_leaves_nothing_to_gain(tmp_path):
    tr, _ = make_conflict_dataset(0, n_queries=20, n_test_queries=4, n_items=8)
    twin = MultiLabelDataset(tr.features, np.column_stack([tr.labels[:, 0]] * 2),
                             tr.query_offsets, tr.query_ids, ["a", "b"])
    path = str(tmp_path / "twin.mltr")
    save_cache(twin, path)
    gbm = GBMConfig(n_trees=30, learning_rate=20)
    ref, _ = train(twin, Preference(weights=(0.5, 0.5)), "LS", gbm)
    cfg = ExperimentConfig.from_dict({"data": {"train": path}, "n_preferences": 3,
                                      "gbm": {"n_trees": 30, "learning_rate": 20},
                                      "output_dir": str(tmp_path / "out")})
    rep = explore_from_reference(cfg, reference_ensemble=ref)
    b = rep.reference_costs[("a|b", 0)]
    for r in rep.results:
        np.testing.assert_allclose(r.train_costs, b, rtol=1e-9)
