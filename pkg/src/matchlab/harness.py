"""Sweep execution, CSV persistence, figure data and the theorem report.

A sweep walks the grid instance x supply ratio x treatment fraction x cost
model x replication.  Random numbers are keyed by (seed, instance, supply
ratio, replication), so every treatment fraction and cost model of a
replication sees the same uniforms; the ground-truth draw of a replication
reuses them as well.  Work is split by (instance, supply ratio) and can run
in worker processes; results are written in grid order.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from matchlab import __version__
from matchlab.costs import CostModel
from matchlab.estimators import (
    ALL_KINDS,
    EstimatorKind,
    estimate_all,
    fluid_evaluation,
    gte_draw,
    gte_fluid,
    phi_ce,
)
from matchlab.fluid import ce_demand_kinks, path_kinks, path_profile, solve_on_path
from matchlab.instances import (
    GeometricSpec,
    default_rates,
    fixed_kappa_levels,
    gen_geometric,
    pedagogical_cost,
    pedagogical_instance,
)
from matchlab.market import ExperimentConfig, sample_state
from matchlab import theorems as thm

log = logging.getLogger(__name__)

RUN_HEADER = [
    "instance_id", "gamma_ratio", "rho", "cost_kind", "cost_param", "replication",
    "estimator", "estimate", "gte", "bias", "empty_group_flag", "degenerate_flag",
]
SUMMARY_HEADER = [
    "instance_id", "gamma_ratio", "rho", "cost_kind", "cost_param", "cost_level", "estimator", "n",
    "mean_estimate", "mean_gte", "mean_bias", "se_bias", "gte_fluid", "estimate_fluid", "bias_fluid",
    "empty_groups", "degenerate",
]
AGGREGATE_HEADER = [
    "gamma_ratio", "rho", "cost_kind", "cost_level", "estimator", "n", "mean_bias", "se_bias",
    "mean_abs_instance_bias", "mean_bias_fluid",
]
NA = "NA"


class ConfigError(ValueError):
    """Invalid sweep configuration; the message names the offending field."""


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isnan(x):
        return NA
    return repr(float(x))


# ---------------------------------------------------------------------------
# configuration


@dataclass
class SweepConfig:
    seed: int = 0
    n_instances: int = 50
    n_replications: int = 50
    n_d: int = 10
    n_s: int = 10
    lambda_level: float = 13.0
    beta_level: float = 3.0
    gamma_ratios: list = field(default_factory=lambda: [float(x) for x in np.linspace(0.3, 3.0, 30)])
    rho_list: list = field(default_factory=lambda: [0.1, 0.3, 0.5])
    alphas: list = field(default_factory=lambda: [0.05, 0.10, 0.20])
    kappa_fractions: list = field(default_factory=list)
    tau: float = 1.0
    gte_draws: int = 1

    def __post_init__(self):
        for name in ("n_instances", "n_replications", "n_d", "n_s", "gte_draws"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name}: must be an integer >= 1, got {value!r}")
        for name in ("lambda_level", "tau"):
            if not float(getattr(self, name)) > 0:
                raise ConfigError(f"{name}: must be positive")
        if not float(self.beta_level) >= 0:
            raise ConfigError("beta_level: must be non-negative")
        if not self.gamma_ratios or any(not float(g) > 0 for g in self.gamma_ratios):
            raise ConfigError("gamma_ratios: must be a non-empty list of positive numbers")
        if not self.rho_list or any(not 0.0 < float(r) < 1.0 for r in self.rho_list):
            raise ConfigError("rho_list: every rho must lie strictly between 0 and 1")
        if any(not 0.0 <= float(a) < 1.0 for a in self.alphas):
            raise ConfigError("alphas: every alpha must lie in [0, 1)")
        if any(not 0.0 < float(k) < 1.0 for k in self.kappa_fractions):
            raise ConfigError("kappa_fractions: every fraction must lie in (0, 1)")
        if not self.alphas and not self.kappa_fractions:
            raise ConfigError("alphas: at least one cost model (alphas or kappa_fractions) is required")

    @classmethod
    def from_dict(cls, doc: dict) -> SweepConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown configuration field")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> SweepConfig:
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be a JSON object")
        return cls.from_dict(doc)

    def instance_seed(self, instance_id: int) -> int:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(0, int(instance_id)))
        return int(ss.generate_state(1, dtype=np.uint64)[0])

    @property
    def rows_per_estimator(self) -> int:
        """Number of run rows each estimator contributes to ``runs.csv``."""
        n_costs = len(self.alphas) + len(self.kappa_fractions)
        return self.n_instances * len(self.gamma_ratios) * len(self.rho_list) * n_costs * self.n_replications

    def cost_models(self, instance) -> list[tuple[CostModel, float]]:
        """Cost models with their instance-free level (alpha, or kappa as a fraction of the smallest value)."""
        models = [(CostModel.proportional(a), float(a)) for a in self.alphas]
        kappas = fixed_kappa_levels(instance, self.kappa_fractions)
        models += [(CostModel.fixed(k), float(f)) for k, f in zip(kappas, self.kappa_fractions)]
        return models


# ---------------------------------------------------------------------------
# sweep


def _run_unit(args):
    """All rows for one (instance, supply ratio) pair, in grid order."""
    cfg, instance_id, gamma_index = args
    instance = gen_geometric(GeometricSpec(cfg.n_d, cfg.n_s, cfg.instance_seed(instance_id)))
    gamma_ratio = float(cfg.gamma_ratios[gamma_index])
    rates = default_rates(instance, gamma_ratio, cfg.lambda_level, cfg.beta_level)
    models = cfg.cost_models(instance)
    rows, fluid = [], {}
    # ground truth per replication and cost model does not depend on rho
    truth, gte_fl = {}, {}
    for cm, _ in models:
        for rep in range(cfg.n_replications):
            draws = [gte_draw(instance, rates, cm, cfg.tau, cfg.seed, (1, instance_id, gamma_index, rep, k))
                     if k else gte_draw(instance, rates, cm, cfg.tau, cfg.seed, (instance_id, gamma_index, rep))
                     for k in range(cfg.gte_draws)]
            truth[cm, rep] = float(np.mean(draws))
    for rho in cfg.rho_list:
        exp_cfg = ExperimentConfig(float(rho), cfg.tau)
        states = [sample_state(rates, exp_cfg, cfg.seed, (instance_id, gamma_index, rep))
                  for rep in range(cfg.n_replications)]
        for cm, level in models:
            if cm not in gte_fl:
                gte_fl[cm] = gte_fluid(instance, rates, cm)
            ev = fluid_evaluation(instance, rates, cm, float(rho), gte=gte_fl[cm])
            fluid[(float(rho), cm.kind, cm.param)] = (ev.gte, {k.value: v for k, v in ev.values.items()})
            for rep, state in enumerate(states):
                est = estimate_all(state, instance, cm, exp_cfg)
                gte = truth[cm, rep]
                for kind in ALL_KINDS:
                    value = est.values[kind]
                    rows.append((instance_id, gamma_ratio, float(rho), cm.kind, cm.param, rep, kind.value,
                                 value, gte, value - gte, est.empty_group, est.degenerate, level))
    return rows, fluid


def _workers() -> int:
    env = os.environ.get("MATCHLAB_THREADS")
    if env:
        return max(1, int(env))
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def _sweep_rows(cfg: SweepConfig, workers: int | None = None):
    units = [(cfg, i, g) for i in range(cfg.n_instances) for g in range(len(cfg.gamma_ratios))]
    workers = workers or _workers()
    if workers == 1 or len(units) == 1:
        yield from map(_run_unit, units)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_run_unit, units)


def _std_err(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")


def run_sweep(cfg: SweepConfig, out_path, workers: int | None = None) -> dict:
    """Run the grid and write ``runs.csv``, ``summary.csv``, ``aggregate.csv`` and ``metadata.json``."""
    out = Path(out_path)
    out.mkdir(parents=True, exist_ok=True)
    cells: dict = {}
    fluid_all: dict = {}
    n_rows = 0
    with open(out / "runs.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RUN_HEADER)
        for rows, fluid in _sweep_rows(cfg, workers):
            for row in rows:
                writer.writerow([_fmt(x) if not isinstance(x, str) else x for x in row[:12]])
                key = (row[0], row[1], row[2], row[3], row[4], row[12], row[6])
                cells.setdefault(key, []).append((row[7], row[8], row[9], row[10], row[11]))
            if rows:
                for (rho, kind, param), val in fluid.items():
                    fluid_all[(rows[0][0], rows[0][1], rho, kind, param)] = val
            n_rows += len(rows)

    summary = []
    for key, vals in cells.items():
        arr = np.array([v[:3] for v in vals], dtype=float)
        gte_fl, est_fl = fluid_all[key[:5]]
        summary.append(key + (
            len(vals), arr[:, 0].mean(), arr[:, 1].mean(), arr[:, 2].mean(), _std_err(arr[:, 2]),
            gte_fl, est_fl[key[6]], est_fl[key[6]] - gte_fl,
            sum(bool(v[3]) for v in vals), sum(bool(v[4]) for v in vals),
        ))
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for row in summary:
            writer.writerow([x if isinstance(x, str) else _fmt(x) for x in row])

    pooled: dict = {}
    for key, vals in cells.items():
        pkey = key[1:4] + key[5:]
        entry = pooled.setdefault(pkey, {"bias": [], "inst": [], "fluid": []})
        biases = [v[2] for v in vals]
        entry["bias"].extend(biases)
        entry["inst"].append(abs(float(np.mean(biases))))
        gte_fl, est_fl = fluid_all[key[:5]]
        entry["fluid"].append(est_fl[key[6]] - gte_fl)
    aggregate = []
    for pkey in sorted(pooled, key=lambda k: (k[0], k[1], k[2], k[3], [e.value for e in ALL_KINDS].index(k[4]))):
        e = pooled[pkey]
        b = np.array(e["bias"])
        aggregate.append(pkey + (len(b), b.mean(), _std_err(b), float(np.mean(e["inst"])), float(np.mean(e["fluid"]))))
    with open(out / "aggregate.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_HEADER)
        for row in aggregate:
            writer.writerow([x if isinstance(x, str) else _fmt(x) for x in row])

    meta = {
        "package_version": __version__,
        "config": asdict(cfg),
        "rows": n_rows,
        "files": ["runs.csv", "summary.csv", "aggregate.csv"],
        "ground_truth": (
            "finite-market treatment effect per replication (mean of gte_draws paired draws); "
            "gte_fluid in summary.csv is the fluid-limit value"
        ),
        "common_random_numbers": (
            "uniform streams keyed by (seed, instance_id, gamma_index, replication) are shared by every rho "
            "and cost model; each replication's first ground-truth draw inverts the same control, treated and "
            "supply uniforms at the global-control and global-treatment rates, and both counterfactual "
            "markets share one supply draw"
        ),
        "standard_error": "sample std (ddof=1) / sqrt(n); NA when n = 1",
        "aggregate": "pooled over instances and replications per (gamma_ratio, rho, cost model, estimator)",
        "sampling": "Poisson counts by exact quantile inversion of Philox uniforms",
    }
    with open(out / "metadata.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"rows": n_rows, "cells": len(summary), "out": str(out)}


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# figure data

FIGURE_KEYS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig_bias", "fig_reduction", "fig_thm3", "fig_thm4")

DESK_SWEEP = {
    "seed": 0, "n_instances": 5, "n_replications": 10, "gamma_ratios": [0.3, 0.6, 1.0, 1.5, 2.0, 3.0],
    "rho_list": [0.1, 0.3, 0.5], "alphas": [0.05, 0.10, 0.20],
}


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([x if isinstance(x, str) else _fmt(x) for x in row])
    return path


def _fig2(out: Path) -> list[Path]:
    inst, _ = pedagogical_instance()
    cm = pedagogical_cost()
    gamma = [1.5, 2.0, 2.0]
    grid = np.round(np.linspace(0.0, 7.0, 141), 12)
    curve = [(d, phi_ce(inst, [d], gamma).objective) for d in grid]
    rows = [(d, v, (1.0 - cm.alpha) * v) for d, v in curve]
    kinks = ce_demand_kinks(inst, gamma, [1.0], 7.0, 71)
    pts = [("breakpoint", d, v, (1.0 - cm.alpha) * v) for d, v in kinks]
    return [
        _write_rows(out / "fig2_value_curves.csv", ["demand", "phi_ce", "phi_ce_discounted"], rows),
        _write_rows(out / "fig2_breakpoints.csv", ["label", "demand", "phi_ce", "phi_ce_discounted"], pts),
    ]


def _panel_points(inst, rates, cm, rho):
    ev = fluid_evaluation(inst, rates, cm, rho)
    psi0 = solve_on_path(inst, rates, cm, 0.0).objective
    psi1 = solve_on_path(inst, rates, cm, 1.0).objective
    psi_rho = solve_on_path(inst, rates, cm, rho).objective
    return ev, psi0, psi1, psi_rho


def _fig3(out: Path) -> list[Path]:
    inst, presets = pedagogical_instance()
    cm = pedagogical_cost()
    files = []
    for name, rates in presets.items():
        prof = path_profile(inst, rates, cm, 101)
        files.append(_write_rows(out / f"fig3{name}_path.csv", ["eta", "psi", "left_slope", "right_slope"],
                                 zip(prof.etas, prof.values, prof.left_slopes, prof.right_slopes)))
        ev, psi0, psi1, _ = _panel_points(inst, rates, cm, 0.5)
        pts = [("global_control", 0.0, psi0), ("global_treatment", 1.0, psi1)]
        pts += [("kink", t, v) for t, v in path_kinks(inst, rates, cm)]
        pts += [("gte", float("nan"), ev.gte), ("rct_ci", float("nan"), ev.values[EstimatorKind.RCT_CI])]
        files.append(_write_rows(out / f"fig3{name}_points.csv", ["label", "eta", "value"], pts))
    return files


def _fig4(out: Path) -> list[Path]:
    inst, presets = pedagogical_instance()
    cm = pedagogical_cost()
    rates, rho = presets["a"], 0.5
    d_exp = float(sum(rates.experiment_demand(rho))[0])
    x = phi_ce(inst, [d_exp], rates.gamma)
    v_bar = float(np.sum(inst.v * x.x) / d_exp)
    ev = fluid_evaluation(inst, rates, cm, rho)
    pts = [
        ("experiment_demand", d_exp), ("phi_ce_experiment", x.objective), ("average_value", v_bar),
        ("control_value", v_bar * rates.lam[0]), ("treated_value", (1 - cm.alpha) * v_bar * rates.treated[0]),
        ("rct_ce", ev.values[EstimatorKind.RCT_CE]), ("gte", ev.gte),
    ]
    return [_write_rows(out / "fig4_rct_ce.csv", ["label", "value"], pts)]


def _fig5(out: Path) -> list[Path]:
    inst, presets = pedagogical_instance()
    cm = pedagogical_cost()
    rates, rho = presets["a"], 0.5
    d_exp = sum(rates.experiment_demand(rho))
    o = phi_ce(inst, d_exp, rates.gamma)
    a_t, b_t = (1 - cm.alpha) * o.a, (1 - cm.alpha) * o.b
    ev = fluid_evaluation(inst, rates, cm, rho)
    pts = [
        ("a", float(o.a[0])), ("a_discounted", float(a_t[0])),
        ("control_dual_value", float(o.a @ rates.lam + o.b @ rates.gamma)),
        ("treated_dual_value", float(a_t @ rates.treated + b_t @ rates.gamma)),
        ("sp_ce", ev.values[EstimatorKind.SP_CE]), ("gte", ev.gte),
    ]
    pts += [(f"b[{j}]", float(b)) for j, b in enumerate(o.b)]
    return [_write_rows(out / "fig5_sp_ce.csv", ["label", "value"], pts)]


def _fig6(out: Path) -> list[Path]:
    inst, presets = pedagogical_instance()
    cm = pedagogical_cost()
    rows = []
    for name, rates in presets.items():
        g = gte_fluid(inst, rates, cm)
        for rho in np.round(np.arange(1, 20) / 20.0, 10):
            ev = fluid_evaluation(inst, rates, cm, float(rho), gte=g)
            for kind in ALL_KINDS:
                rows.append((name, float(rho), kind.value, ev.values[kind], ev.bias(kind)))
    return [_write_rows(out / "fig6_design_comparison.csv", ["panel", "rho", "estimator", "value", "bias"], rows)]


def _fig7(out: Path) -> list[Path]:
    inst, presets = pedagogical_instance()
    cm = pedagogical_cost()
    rows = []
    for name, rates in presets.items():
        ev, psi0, psi1, psi_rho = _panel_points(inst, rates, cm, 0.5)
        slope = ev.values[EstimatorKind.SP_CI]
        rows += [
            (name, "psi_experiment", 0.5, psi_rho), (name, "sp_line_start", 0.0, psi_rho - 0.5 * slope),
            (name, "sp_line_end", 1.0, psi_rho + 0.5 * slope), (name, "sp_ci", float("nan"), slope),
            (name, "gte", float("nan"), ev.gte), (name, "global_control", 0.0, psi0), (name, "global_treatment", 1.0, psi1),
        ]
    return [_write_rows(out / "fig7_sp_ci.csv", ["panel", "label", "eta", "value"], rows)]


def _sweep_figure(out: Path, sweep_cfg: SweepConfig | None, reduction: bool) -> list[Path]:
    cfg = sweep_cfg or SweepConfig.from_dict(DESK_SWEEP)
    sweep_dir = out / "sweep"
    meta_path = sweep_dir / "metadata.json"
    cached = False
    if meta_path.exists() and (sweep_dir / "aggregate.csv").exists():
        with open(meta_path) as fh:
            cached = json.load(fh).get("config") == json.loads(json.dumps(asdict(cfg)))
    if not cached:
        run_sweep(cfg, sweep_dir)
    agg = read_csv(sweep_dir / "aggregate.csv")
    if not reduction:
        rows = [(r["gamma_ratio"], r["rho"], r["cost_kind"], r["cost_level"], r["estimator"], r["mean_bias"], r["se_bias"])
                for r in agg]
        return [_write_rows(out / "fig_bias.csv",
                            ["gamma_ratio", "rho", "cost_kind", "cost_level", "estimator", "mean_bias", "se_bias"], rows)]
    by = {(r["gamma_ratio"], r["rho"], r["cost_kind"], r["cost_level"], r["estimator"]): float(r["mean_bias"]) for r in agg}
    rows = []
    for (g, rho, kind, param, est), bias in by.items():
        if est in ("SP_CE", "SP_CI"):
            base = by[(g, rho, kind, param, est.replace("SP", "RCT"))]
            ratio = abs(bias) / abs(base) if base != 0 else float("nan")
            rows.append((g, rho, kind, param, "CE" if est == "SP_CE" else "CI", bias, base, ratio))
    return [_write_rows(out / "fig_reduction.csv",
                        ["gamma_ratio", "rho", "cost_kind", "cost_level", "design", "sp_bias", "rct_bias", "ratio"], rows)]


def _study_instances(n=5, seed=0, n_d=10, n_s=10):
    cfg = SweepConfig(seed=seed, n_instances=n, n_d=n_d, n_s=n_s)
    return [(i, gen_geometric(GeometricSpec(n_d, n_s, cfg.instance_seed(i)))) for i in range(n)]


def _fig_thm3(out: Path) -> list[Path]:
    rows = []
    for i, inst in _study_instances():
        for g in (0.5, 1.0, 2.0):
            rates = default_rates(inst, g)
            for cm in (CostModel.proportional(0.1), CostModel.fixed(fixed_kappa_levels(inst)[1])):
                thr = thm.sp_ce_threshold(inst, cm)
                gte = gte_fluid(inst, rates, cm)
                for rho in np.round(np.arange(1, 20) / 20.0, 10):
                    ev = fluid_evaluation(inst, rates, cm, float(rho), kinds=(EstimatorKind.RCT_CE, EstimatorKind.SP_CE), gte=gte)
                    rows.append((i, g, cm.kind, cm.param, float(rho), thr,
                                 ev.bias(EstimatorKind.RCT_CE), ev.bias(EstimatorKind.SP_CE)))
    return [_write_rows(out / "fig_thm3.csv", ["instance_id", "gamma_ratio", "cost_kind", "cost_param", "rho",
                                                "threshold", "rct_ce_bias", "sp_ce_bias"], rows)]


def _fig_thm4(out: Path) -> list[Path]:
    rows = []
    for i, inst in _study_instances():
        for g in np.round(np.linspace(0.3, 3.0, 10), 10):
            rates = default_rates(inst, float(g))
            for cm in (CostModel.proportional(0.1),):
                for rho in (0.1, 0.3, 0.5):
                    rep = thm.check_thm_bias_ratio_bound(inst, rates, cm, rho)
                    rows.append((i, float(g), cm.kind, cm.param, rho, rep.applicable,
                                 rep.values.get("bound", float("nan")), rep.values.get("realized_ratio", float("nan"))))
    return [_write_rows(out / "fig_thm4.csv", ["instance_id", "gamma_ratio", "cost_kind", "cost_param", "rho",
                                                "applicable", "bound", "realized_ratio"], rows)]


def reproduce_figures(which: str, out_dir, sweep_cfg: SweepConfig | None = None) -> list[Path]:
    """Write plot-ready CSVs for one figure key (or ``"all"``)."""
    keys = FIGURE_KEYS if which == "all" else (which,)
    for key in keys:
        if key not in FIGURE_KEYS:
            raise KeyError(f"unknown figure key {key!r}; choose from {', '.join(FIGURE_KEYS)} or 'all'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    makers = {
        "fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7,
        "fig_bias": lambda o: _sweep_figure(o, sweep_cfg, reduction=False),
        "fig_reduction": lambda o: _sweep_figure(o, sweep_cfg, reduction=True),
        "fig_thm3": _fig_thm3, "fig_thm4": _fig_thm4,
    }
    files = []
    for key in keys:
        files += makers[key](out)
    return files


# ---------------------------------------------------------------------------
# theorem report


def theorem_suite(n_instances: int = 50, seed: int = 0, rhos=(0.1, 0.3, 0.5), alphas=(0.05, 0.10, 0.20)):
    """Yield theorem reports over seeded geometric instances and the special constructions."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    for i, inst in _study_instances(n_instances, seed):
        g = float(rng.uniform(0.3, 3.0))
        rates = default_rates(inst, g)
        models = [CostModel.proportional(a) for a in alphas] + [CostModel.fixed(k) for k in fixed_kappa_levels(inst)]
        label = f"geometric[{i}] gamma_ratio={g:.6g}"
        for cm in models:
            for rho in rhos:
                yield thm.check_thm_rct_ce(inst, rates, cm, rho, label)
                yield thm.check_thm_sp_ce_reduction(inst, rates, cm, rho, label)
                yield thm.check_thm_bias_ratio_bound(inst, rates, cm, rho, label)
            yield thm.check_thm_rct_ci_regimes(inst, rates, cm, 0.5, label)
            yield thm.check_thm_sp_ci(inst, rates, cm, 0.5, label)
            yield thm.check_thm_design_unbiasedness(inst, rates, cm, label)
    inst, presets = pedagogical_instance()
    cm = pedagogical_cost()
    for name, rates in presets.items():
        label = f"pedagogical[{name}]"
        for rho in rhos:
            yield thm.check_thm_rct_ce(inst, rates, cm, rho, label)
            yield thm.check_thm_sp_ce_reduction(inst, rates, cm, rho, label)
            yield thm.check_thm_bias_ratio_bound(inst, rates, cm, rho, label)
        yield thm.check_thm_design_unbiasedness(inst, rates, cm, label)
    for cm in (CostModel.proportional(0.15), CostModel.proportional(0.0), CostModel.fixed(0.3)):
        yield thm.check_sp_ce_tightness(cm)


def verify_theorems(out_path, n_instances: int = 50, seed: int = 0) -> list:
    """Run the fluid theorem suite and write a JSON report; returns the reports."""
    reports = list(theorem_suite(n_instances, seed))
    by_theorem: dict = {}
    for r in reports:
        t = by_theorem.setdefault(r.theorem, {"checked": 0, "not_applicable": 0, "failed": 0})
        t["checked"] += int(r.applicable)
        t["not_applicable"] += int(not r.applicable)
        t["failed"] += int(not r.holds)
    doc = {
        "package_version": __version__,
        "seed": seed,
        "n_instances": n_instances,
        "all_hold": all(r.holds for r in reports),
        "summary": by_theorem,
        "reports": [r.as_dict() for r in reports],
    }
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return reports
