"""``dgplan`` command line: one subcommand per planning stage plus the full pipeline."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys

import numpy as np

from .grp import parse_weights, write_ranking
from .moalo import MOALO
from .objectives import DgUnit, PlanningProblem, evaluate, load_economics, objective_dict
from .pipeline import (PipelineError, RunConfig, decide, format_report, load_portfolio,
                       open_case, read_pareto, report, run_pipeline, unit_label,
                       write_pareto, write_report_csv)
from .powerflow import Injection, solve, topology
from .siting import stage1_place
from .stochastic import load_models, sample_outputs
from .storage import read_storage_csv, size_storage, write_storage_csv
from .ppf import run_ppf


def _read_json(path):
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _out_path(args, name, default):
    path = getattr(args, name, None)
    if path:
        return path
    return os.path.join(args.out_dir or ".", default)


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _read_injections(path):
    doc = _read_json(path)
    if isinstance(doc, dict) and "units" in doc:
        units, _ = load_portfolio(doc)
        return [u.injection() for u in units]
    rows = doc if isinstance(doc, list) else doc.get("injections", [])
    return [Injection(int(r["bus"]), float(r.get("p_kw", 0.0)), float(r.get("q_kvar", 0.0)))
            for r in rows]


def cmd_validate(args):
    case = open_case(args.case)
    from .network import case_summary
    print(json.dumps(case_summary(case), indent=1))
    return 0


def cmd_powerflow(args):
    case = open_case(args.case)
    inj = _read_injections(args.injections) if args.injections else ()
    sol = solve(case, inj)
    out = _out_path(args, "out", "powerflow.csv")
    _ensure_parent(out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus", "u_pu", "angle_deg"])
        for b, u, d in zip(case.bus_ids, sol.u, sol.delta):
            w.writerow([int(b), f"{u:.10g}", f"{math.degrees(d):.10g}"])
    topo = topology(case)
    r2 = topo.r * np.abs(sol.branch_i) ** 2 * case.s_base_kva
    branches = os.path.splitext(out)[0] + "_branches.csv"
    with open(branches, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch", "from_bus", "to_bus", "p_kw", "q_kvar", "loss_kw"])
        for k, br in enumerate(case.ordered):
            w.writerow([br.id, br.from_bus, br.to_bus, f"{sol.branch_p[k]:.10g}",
                        f"{sol.branch_q[k]:.10g}", f"{r2[k]:.10g}"])
    print(json.dumps({"p_loss_kw": sol.p_loss, "q_loss_kvar": sol.q_loss,
                      "u_min_pu": float(sol.u.min()),
                      "u_min_bus": int(case.bus_ids[int(np.argmin(sol.u))]),
                      "converged": sol.converged, "iterations": sol.iterations,
                      "bus_csv": out, "branch_csv": branches}, indent=1))
    return 0 if sol.converged else 1


def cmd_stage1(args):
    case = open_case(args.case)
    res = stage1_place(case, args.n_dg, bound=args.bound)
    out = _out_path(args, "out", "siting.json")
    _ensure_parent(out)
    with open(out, "w") as fh:
        json.dump(res.to_dict(), fh, indent=1)
        fh.write("\n")
    for b, c in res.placements:
        print(f"bus {b:>3}  {c:10.1f} kW")
    return 0


def _read_candidate_csv(path, econ):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"kind", "bus", "s_rated_kw"} <= set(rows[0]):
        raise ValueError("candidate CSV needs columns kind,bus,s_rated_kw")
    return [DgUnit(r["kind"].upper(), int(r["bus"]), float(r["s_rated_kw"]),
                   float(r.get("power_factor") or 1.0), econ.get(r["kind"].upper()))
            for r in rows]


def cmd_evaluate(args):
    case = open_case(args.case)
    cfg = _read_json(args.config)
    econ = load_economics(cfg.get("economics", {}))
    units = _read_candidate_csv(args.candidate, econ)
    problem = PlanningProblem(case, [DgUnit(u.kind, u.bus, 0.0, u.power_factor, u.economics)
                                     for u in units],
                              upper=[max(u.s_rated, case.p_load.sum()) for u in units])
    obj = evaluate(problem, [u.s_rated for u in units])
    print(json.dumps(objective_dict(obj), indent=1))
    return 0


def cmd_optimize(args):
    case = open_case(args.case)
    cfg = _read_json(args.config)
    siting = _read_json(args.siting)
    econ = load_economics(cfg.get("economics", {}))
    if "sites" in cfg:
        sites = [(s["kind"].upper(), int(s["bus"])) for s in cfg["sites"]]
    else:
        kinds = cfg.get("kinds", ["WT", "PV", "MT", "MT"])
        buses = [p["bus"] for p in siting["placements"]]
        if len(kinds) != len(buses):
            raise ValueError("config 'kinds' must list one kind per sited bus")
        sites = list(zip([k.upper() for k in kinds], buses))
    units = [DgUnit(k, b, economics=econ[k]) for k, b in sites]
    problem = PlanningProblem(case, units, upper=cfg.get("upper_kw"))
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    est = MOALO(seed=seed, **cfg.get("moalo", {})).fit(problem)
    out = _out_path(args, "out", "pareto.csv")
    _ensure_parent(out)
    write_pareto(out, units, est.archive_.members)
    print(f"{len(est.archive_)} archive members, {int(est.feasible_.sum())} feasible -> {out}")
    return 0


def cmd_decide(args):
    cols, X, F, feas = read_pareto(args.pareto)
    weights = parse_weights(args.weights, F.shape[1])
    ranking, rows = decide(F, feas, weights)
    out = _out_path(args, "out", "ranking.csv")
    _ensure_parent(out)
    write_ranking(out, ranking, [str(r) for r in rows])
    best = rows[ranking.best_index]
    print(f"compromise: row {best}  " + "  ".join(f"{c}={v:.1f}" for c, v in zip(cols, X[best]))
          + f"  c_p={F[best, 0]:.4f} vsf={F[best, 1]:.4f} loss={F[best, 2]:.3f} kW")
    return 0


def _models(args, dists):
    doc = _read_json(args.config).get("distributions") if args.config else None
    doc = doc or dists
    return load_models(doc) if doc else None


def cmd_sample(args):
    units, dists = load_portfolio(args.sites)
    sets = sample_outputs(units, args.n, _seed(args), _models(args, dists))
    out = _out_path(args, "out", "samples.csv")
    _ensure_parent(out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample"] + [unit_label(u) for u in units])
        for t in range(args.n):
            w.writerow([t] + [f"{s.samples[t]:.10g}" for s in sets])
    print(f"{args.n} samples x {len(units)} sites -> {out}")
    return 0


def cmd_storage(args):
    units, dists = load_portfolio(args.sites)
    specs = size_storage(units, args.omega, args.n, _seed(args), _models(args, dists))
    out = _out_path(args, "out", "storage.csv")
    _ensure_parent(out)
    write_storage_csv(out, specs)
    for s in specs:
        print(f"bus {s.bus:>3}  omega={s.omega:g}  p_reest={s.p_reest:.1f} kW")
    return 0


def cmd_ppf(args):
    case = open_case(args.case)
    units, dists = load_portfolio(args.portfolio)
    storage = read_storage_csv(args.storage) if args.storage else None
    rep = run_ppf(case, units, storage, args.n, _seed(args), _models(args, dists))
    paths = rep.write(args.out_dir or ".")
    print(f"{rep.scenario}: {len(paths)} CDF files, {rep.excluded} trials excluded, "
          f"median loss {rep.p_loss.quantile(0.5):.2f} kW")
    return 0


def cmd_pipeline(args):
    if not args.config:
        raise ValueError("pipeline needs --config")
    cfg = RunConfig.from_json(args.config, seed=args.seed, out_dir=args.out_dir)
    try:
        manifest = run_pipeline(cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(format_report(report(manifest)))
    print(f"manifest: {os.path.join(cfg.out_dir, 'manifest.json')}")
    return 0


def cmd_report(args):
    src = args.manifest or args.out_dir
    if not src:
        raise ValueError("report needs --manifest or --out-dir")
    rows = report(src)
    print(format_report(rows))
    if args.out:
        write_report_csv(args.out, rows)
    return 0


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--out-dir", default=None, help="output directory")
    common.add_argument("--config", default=None, help="JSON configuration file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dgplan", description="DG siting, sizing and storage planning")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("validate", cmd_validate, "check a case file and print its totals")
    p.add_argument("--case", required=True)

    p = add("powerflow", cmd_powerflow, "solve one power flow")
    p.add_argument("--case", required=True)
    p.add_argument("--injections", help="JSON list of {bus, p_kw, q_kvar} or a portfolio")
    p.add_argument("--out")

    p = add("stage1", cmd_stage1, "loss-sensitivity siting")
    p.add_argument("--case", required=True)
    p.add_argument("--n-dg", type=int, default=4)
    p.add_argument("--bound", choices=("penetration", "downstream"), default="penetration")
    p.add_argument("--out")

    p = add("evaluate", cmd_evaluate, "objectives of one candidate")
    p.add_argument("--case", required=True)
    p.add_argument("--candidate", required=True, help="CSV with kind,bus,s_rated_kw")

    p = add("optimize", cmd_optimize, "multi-objective capacity sizing")
    p.add_argument("--case", required=True)
    p.add_argument("--siting", required=True)
    p.add_argument("--out")

    p = add("decide", cmd_decide, "grey relation projection ranking of a Pareto set")
    p.add_argument("--pareto", required=True)
    p.add_argument("--weights", help="comma-separated weights for c_p, vsf_total, p_loss")
    p.add_argument("--out")

    p = add("sample", cmd_sample, "draw DG output samples")
    p.add_argument("--sites", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--out")

    p = add("storage", cmd_storage, "chance-constrained storage sizing")
    p.add_argument("--sites", required=True)
    p.add_argument("--omega", type=float, default=0.60)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--out")

    p = add("ppf", cmd_ppf, "Monte Carlo probabilistic power flow")
    p.add_argument("--case", required=True)
    p.add_argument("--portfolio", required=True)
    p.add_argument("--storage")
    p.add_argument("--n", type=int, default=10_000)

    add("pipeline", cmd_pipeline, "run every stage")

    p = add("report", cmd_report, "base vs compromise comparison of a finished run")
    p.add_argument("--manifest")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
