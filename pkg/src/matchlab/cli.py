"""Command-line entry point: ``matchlab {gen,solve,sweep,figures,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from matchlab.costs import CostModel, CostModelError
from matchlab.harness import FIGURE_KEYS, ConfigError, SweepConfig, reproduce_figures, run_sweep, verify_theorems
from matchlab.instances import GeometricSpec, gen_geometric, instance_from_json, instance_to_json, pedagogical_instance
from matchlab.lp import CeProblem, CiProblem, InputError, solve_ce, solve_ci, verify_kkt

log = logging.getLogger("matchlab")


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",") if x.strip()], dtype=float)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _dump(doc, path=None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_gen(args) -> int:
    if args.pedagogical:
        inst, _ = pedagogical_instance()
    else:
        inst = gen_geometric(GeometricSpec(args.n_d, args.n_s, args.seed))
    _dump(instance_to_json(inst), args.out)
    return 0


def cmd_solve(args) -> int:
    with open(args.instance) as fh:
        inst = instance_from_json(json.load(fh))
    if args.treated is None:
        problem = CeProblem(inst, args.demand, args.supply)
        out = solve_ce(problem)
        doc = {"design": "ce", "objective": out.objective, "flow": out.x.tolist(),
               "demand_duals": out.a.tolist(), "supply_duals": out.b.tolist()}
    else:
        if (args.alpha is None) == (args.kappa is None):
            raise InputError("a cost-included solve needs exactly one of --alpha or --kappa")
        cm = CostModel.proportional(args.alpha) if args.alpha is not None else CostModel.fixed(args.kappa)
        problem = CiProblem(inst, args.demand, args.treated, args.supply, cm)
        out = solve_ci(problem)
        doc = {"design": "ci", "cost_model": cm.label, "objective": out.objective,
               "flow_control": out.x_con.tolist(), "flow_treated": out.x_tre.tolist(),
               "demand_duals_control": out.a_con.tolist(), "demand_duals_treated": out.a_tre.tolist(),
               "supply_duals": out.b.tolist()}
    doc["degenerate"] = bool(out.degenerate)
    doc["kkt_violations"] = [f"{v.constraint}: {v.residual!r}" for v in verify_kkt(out, problem)]
    _dump(doc, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = SweepConfig.from_json(args.config)
    summary = run_sweep(cfg, args.out)
    log.info("wrote %d rows in %d cells to %s", summary["rows"], summary["cells"], summary["out"])
    return 0


def cmd_figures(args) -> int:
    cfg = SweepConfig.from_json(args.config) if args.config else None
    for path in reproduce_figures(args.which, args.out, cfg):
        print(path)
    return 0


def cmd_verify(args) -> int:
    reports = verify_theorems(args.out, n_instances=args.n_instances, seed=args.seed)
    failed = [r for r in reports if not r.holds]
    for r in failed:
        for c in r.failures:
            print(f"FAIL {r.theorem} [{r.label}] {c.name}: {c.lhs!r} {c.relation} {c.rhs!r}", file=sys.stderr)
    print(f"{len(reports) - len(failed)}/{len(reports)} theorem reports hold; report written to {args.out}")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matchlab", description="Matching-market experiment bias toolkit.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="emit an instance as JSON")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-d", type=int, default=10)
    g.add_argument("--n-s", type=int, default=10)
    g.add_argument("--pedagogical", action="store_true", help="emit the one-demand-type teaching instance")
    g.add_argument("--out", default=None, help="output file (default stdout)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve one matching LP and print primal and dual solutions")
    s.add_argument("instance", help="instance JSON file")
    s.add_argument("--demand", type=_vector, required=True, help="demand (control demand for CI), comma-separated")
    s.add_argument("--supply", type=_vector, required=True, help="supply, comma-separated")
    s.add_argument("--treated", type=_vector, default=None, help="treated demand; selects the cost-included LP")
    s.add_argument("--alpha", type=float, default=None, help="proportional cost parameter")
    s.add_argument("--kappa", type=float, default=None, help="fixed cost per treated match")
    s.add_argument("--out", default=None, help="output file (default stdout)")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run a configured sweep and write CSV results")
    w.add_argument("--config", required=True, help="SweepConfig JSON file")
    w.add_argument("--out", required=True, help="output directory")
    w.set_defaults(func=cmd_sweep)

    f = sub.add_parser("figures", help="write plot-ready figure data")
    f.add_argument("--which", required=True, choices=FIGURE_KEYS + ("all",))
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--config", default=None, help="SweepConfig JSON for the sweep-based figures")
    f.set_defaults(func=cmd_figures)

    v = sub.add_parser("verify", help="check the fluid theorems and write a JSON report")
    v.add_argument("--out", required=True, help="report file")
    v.add_argument("--n-instances", type=int, default=50)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError, CostModelError, ValueError, OSError) as exc:
        print(f"matchlab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
