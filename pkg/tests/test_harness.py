import csv
import json

import pytest

from matchlab import harness, theorems
from matchlab.estimators import EstimatorKind
from matchlab.harness import (
    FIGURE_KEYS,
    RUN_HEADER,
    ConfigError,
    SweepConfig,
    read_csv,
    reproduce_figures,
    run_sweep,
    verify_theorems,
)

SMALL = dict(seed=3, n_instances=2, n_replications=3, n_d=4, n_s=4, gamma_ratios=[0.5, 2.0],
             rho_list=[0.2, 0.5], alphas=[0.1], kappa_fractions=[0.3])


def test_default_grid_cardinality():
    assert SweepConfig().rows_per_estimator == 50 * 30 * 3 * 3 * 50
    assert len(SweepConfig().gamma_ratios) == 30


def test_config_errors_name_the_field(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"seed": 1, "n_replicatons": 5}))
    with pytest.raises(ConfigError, match="n_replicatons"):
        SweepConfig.from_json(path)
    for field, value in [("n_instances", 0), ("rho_list", [0.0]), ("gamma_ratios", [-1.0]), ("alphas", [1.0]),
                         ("tau", 0.0), ("n_replications", 2.5)]:
        with pytest.raises(ConfigError, match=field):
            SweepConfig.from_dict({field: value})


def test_sweep_outputs(tmp_path):
    cfg = SweepConfig.from_dict(SMALL)
    summary = run_sweep(cfg, tmp_path, workers=1)
    rows = read_csv(tmp_path / "runs.csv")
    with open(tmp_path / "runs.csv") as fh:
        assert next(csv.reader(fh)) == RUN_HEADER
    assert summary["rows"] == len(rows) == cfg.rows_per_estimator * len(EstimatorKind)
    for r in rows:
        assert float(r["bias"]) == float(r["estimate"]) - float(r["gte"])
    # the ground truth of a replication does not depend on the treatment fraction
    gte = {}
    for r in rows:
        key = (r["instance_id"], r["gamma_ratio"], r["cost_kind"], r["replication"])
        gte.setdefault(key, set()).add(r["gte"])
    assert all(len(v) == 1 for v in gte.values())
    summ = read_csv(tmp_path / "summary.csv")
    assert len(summ) == len(rows) // cfg.n_replications
    assert all(r["n"] == "3" and r["se_bias"] != "NA" for r in summ)
    agg = read_csv(tmp_path / "aggregate.csv")
    assert len(agg) == len(summ) // cfg.n_instances
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert "common_random_numbers" in meta and meta["config"]["seed"] == 3


def test_single_replication_reports_missing_standard_error(tmp_path):
    run_sweep(SweepConfig.from_dict(dict(SMALL, n_replications=1, n_instances=1)), tmp_path, workers=1)
    assert all(r["se_bias"] == "NA" for r in read_csv(tmp_path / "summary.csv"))


def test_sweep_is_byte_identical_across_runs_and_workers(tmp_path):
    cfg = SweepConfig.from_dict(SMALL)
    run_sweep(cfg, tmp_path / "a", workers=1)
    run_sweep(cfg, tmp_path / "b", workers=2)
    for name in ("runs.csv", "summary.csv", "aggregate.csv", "metadata.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("MATCHLAB_THREADS", "3")
    assert harness._workers() == 3


def _rows(path):
    return read_csv(path)


def test_pedagogical_figures(tmp_path):
    files = reproduce_figures("fig3", tmp_path)
    assert {f.name for f in files} >= {"fig3a_points.csv", "fig3b_points.csv"}
    pts = {(r["label"], r["eta"]): float(r["value"]) for r in _rows(tmp_path / "fig3a_points.csv")}
    assert pts[("global_control", "0.0")] == pytest.approx(2.0, abs=1e-12)
    assert pts[("global_treatment", "1.0")] == pytest.approx(4.35625, abs=1e-12)

    reproduce_figures("fig2", tmp_path)
    bps = [(float(r["demand"]), float(r["phi_ce"])) for r in _rows(tmp_path / "fig2_breakpoints.csv")]
    assert bps == [pytest.approx(p, abs=1e-9) for p in [(1.5, 3.0), (3.5, 5.0), (5.5, 5.5)]]

    reproduce_figures("fig7", tmp_path)
    b = {r["label"]: float(r["value"]) for r in _rows(tmp_path / "fig7_sp_ci.csv") if r["panel"] == "b"}
    assert b["sp_ci"] == pytest.approx(-0.025, abs=1e-9)
    assert b["sp_line_start"] == pytest.approx(4.81875, abs=1e-9)
    assert b["sp_line_end"] == pytest.approx(4.79375, abs=1e-9)

    for key in ("fig4", "fig5", "fig6"):
        assert reproduce_figures(key, tmp_path)


def test_fluid_study_figures(tmp_path):
    for key in ("fig_thm3", "fig_thm4"):
        (path,) = reproduce_figures(key, tmp_path)
        assert len(_rows(path)) > 0


def test_sweep_figures_use_given_config(tmp_path):
    cfg = SweepConfig.from_dict(dict(SMALL, kappa_fractions=[]))
    (bias,) = reproduce_figures("fig_bias", tmp_path, cfg)
    (red,) = reproduce_figures("fig_reduction", tmp_path, cfg)
    assert len(_rows(bias)) == 2 * 2 * 1 * 5
    assert {r["design"] for r in _rows(red)} == {"CE", "CI"}


def test_unknown_figure_key(tmp_path):
    with pytest.raises(KeyError):
        reproduce_figures("fig99", tmp_path)
    assert "fig_thm4" in FIGURE_KEYS


def test_verify_report(tmp_path):
    out = tmp_path / "report.json"
    reports = verify_theorems(out, n_instances=2)
    doc = json.loads(out.read_text())
    assert doc["all_hold"] and all(r.holds for r in reports)
    assert doc["summary"]["thm1_rct_ce_overestimates"]["failed"] == 0
    tight = [r for r in doc["reports"] if r["theorem"] == "thm3_tightness"]
    assert tight and all("sp_ce_bias" in r["values"] and "rct_ce_bias" in r["values"] for r in tight)


def test_verify_detects_injected_sign_flip(tmp_path, monkeypatch):
    real = theorems.fluid_evaluation

    def flipped(*args, **kwargs):
        ev = real(*args, **kwargs)
        values = dict(ev.values)
        if EstimatorKind.RCT_CE in values:
            values[EstimatorKind.RCT_CE] = -values[EstimatorKind.RCT_CE]
        return type(ev)(values, ev.gte, ev.degenerate_ce, ev.degenerate_ci)

    monkeypatch.setattr(theorems, "fluid_evaluation", flipped)
    out = tmp_path / "report.json"
    reports = verify_theorems(out, n_instances=1)
    doc = json.loads(out.read_text())
    assert not doc["all_hold"]
    bad = [r for r in reports if r.theorem == "thm1_rct_ce_overestimates" and not r.holds]
    assert bad
    witness = bad[0].failures[0]
    assert witness.lhs < 0 and witness.rhs == 0.0
