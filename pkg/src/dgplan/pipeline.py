"""End-to-end planning run: siting, sizing, decision, storage and PPF.

Every stage writes its artifact into the run directory and the run ends
with ``manifest.json`` listing inputs, seed, versions, per-stage timings
and a SHA-256 of each artifact. CSV content depends only on the
configuration and the seed.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import sklearn

from . import __version__
from .grp import DecisionMatrix, rank, write_ranking
from .moalo import MOALO
from .network import NetworkCase, bundled_case, read_case
from .objectives import (KINDS, DgUnit, ObjectiveVector, PlanningProblem, evaluate,
                         load_economics)
from .ppf import run_ppf
from .siting import stage1_place
from .stochastic import load_models
from .storage import size_storage, write_storage_csv

log = logging.getLogger(__name__)

STAGES = ("stage1", "optimize", "decide", "storage", "ppf_without", "ppf_with")
OBJECTIVE_COLUMNS = ("c_p_pu", "vsf_total_pu", "p_loss_kw")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# ---------------------------------------------------------------- inputs

def open_case(spec: str) -> NetworkCase:
    """A case file path, or the name of a bundled case such as ``pge69``."""
    if os.path.exists(spec):
        return read_case(spec)
    if os.sep not in spec and "." not in spec:
        return bundled_case(spec)
    raise FileNotFoundError(f"case file not found: {spec}")


def _maybe_json(value):
    if value is None or isinstance(value, dict):
        return value
    with open(value) as fh:
        return json.load(fh)


def load_portfolio(path_or_doc, economics: dict | None = None) -> tuple[list[DgUnit], dict | None]:
    """Read ``{"units": [{"kind", "bus", "s_rated_kw", "power_factor"?}], "distributions"?}``.

    A bare list of units is accepted as well. Returns the units and the
    distribution config (or None).
    """
    doc = path_or_doc
    if isinstance(doc, (str, Path)):
        with open(doc) as fh:
            doc = json.load(fh)
    rows = doc if isinstance(doc, list) else doc.get("units", [])
    dists = None if isinstance(doc, list) else doc.get("distributions")
    econ = economics or {}
    units = []
    for r in rows:
        kind = str(r["kind"]).upper()
        units.append(DgUnit(kind, int(r["bus"]), float(r.get("s_rated_kw", 0.0)),
                            float(r.get("power_factor", 1.0)), econ.get(kind)))
    if not units:
        raise ValueError("portfolio has no units")
    return units, dists


def portfolio_doc(units, distributions=None) -> dict:
    doc = {"units": [{"kind": u.kind, "bus": u.bus, "s_rated_kw": u.s_rated,
                      "power_factor": u.power_factor} for u in units]}
    if distributions:
        doc["distributions"] = distributions
    return doc


def unit_label(u: DgUnit) -> str:
    return f"{u.kind}{u.bus}_kw"


def write_pareto(path, units, archive_members) -> None:
    rows = []
    for m in archive_members:
        o = m.objectives
        rows.append((list(m.x), o.c_p, o.vsf_total, o.p_loss_total, o.feasible))
    # sort for a stable, readable file
    rows.sort(key=lambda r: (r[3], -r[1], -r[2], tuple(r[0])))
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([unit_label(u) for u in units] + list(OBJECTIVE_COLUMNS) + ["feasible"])
        for x, cp, v, loss, feas in rows:
            out.writerow([f"{c:.6f}" for c in x] + [f"{cp:.10g}", f"{v:.10g}", f"{loss:.10g}",
                                                   int(bool(feas))])


def read_pareto(path):
    """Returns (unit column names, capacity matrix, objective matrix, feasible mask)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    missing = [c for c in OBJECTIVE_COLUMNS + ("feasible",) if c not in header]
    if missing:
        raise ValueError(f"pareto CSV lacks columns {missing}")
    cols = [h for h in header if h not in OBJECTIVE_COLUMNS and h != "feasible"]
    if not rows:
        raise ValueError("pareto CSV has no rows")
    pos = {h: i for i, h in enumerate(header)}
    X = np.array([[float(r[pos[c]]) for c in cols] for r in rows])
    F = np.array([[float(r[pos[c]]) for c in OBJECTIVE_COLUMNS] for r in rows])
    feas = np.array([r[pos["feasible"]] in ("1", "True", "true") for r in rows])
    return cols, X, F, feas


def decide(F, feasible=None, weights=None):
    """GRP ranking over the feasible rows (all rows if none is feasible).

    Returns (ranking, row indices the ranking refers to).
    """
    F = np.asarray(F, float)
    rows = np.arange(len(F))
    if feasible is not None and np.any(feasible):
        rows = rows[np.asarray(feasible, bool)]
    res = rank(DecisionMatrix(F[rows], ("max", "max", "min"), weights))
    return res, rows


def hash_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def hash_artifact(path) -> str:
    """SHA-256 of a file, or of a directory's sorted (name, file hash) list."""
    if os.path.isdir(path):
        h = hashlib.sha256()
        for name in sorted(os.listdir(path)):
            h.update(name.encode())
            h.update(hash_artifact(os.path.join(path, name)).encode())
        return h.hexdigest()
    return hash_file(path)


# ---------------------------------------------------------------- config

@dataclass
class RunConfig:
    case: str = "pge69"
    n_dg: int = 4
    kinds: list = field(default_factory=lambda: ["WT", "PV", "MT", "MT"])
    sites: list | None = None        # explicit [{"kind", "bus"}], overrides stage-1 buses
    bound: str = "penetration"
    moalo: dict = field(default_factory=lambda: {"n_ants": 100, "max_iter": 500,
                                                 "archive_capacity": 100})
    upper_kw: list | None = None
    economics: dict | str | None = None
    distributions: dict | str | None = None
    weights: list | None = None
    omega: float = 0.60
    n_samples: int = 100_000
    n_ppf: int = 10_000
    seed: int | None = None
    out_dir: str = "run"

    @classmethod
    def from_json(cls, path_or_dict, **overrides) -> "RunConfig":
        doc = dict(_maybe_json(path_or_dict) or {})
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**doc)

    def validate(self) -> None:
        if self.seed is None:
            raise ValueError("a seed is required for pipeline runs")
        if not (os.path.exists(self.case) or (os.sep not in self.case and "." not in self.case)):
            raise FileNotFoundError(f"case file not found: {self.case}")
        for name in ("economics", "distributions"):
            ref = getattr(self, name)
            if isinstance(ref, str) and not os.path.exists(ref):
                raise FileNotFoundError(f"{name} file not found: {ref}")
        kinds = [s["kind"] for s in self.sites] if self.sites else self.kinds
        if any(str(k).upper() not in KINDS for k in kinds):
            raise ValueError(f"DG kinds must be among {KINDS}")
        if not self.sites and len(self.kinds) != self.n_dg:
            raise ValueError("kinds must list one DG kind per site")
        if not 0 < self.omega < 1:
            raise ValueError("omega must be in (0, 1)")
        if min(self.n_samples, self.n_ppf) < 1:
            raise ValueError("sample counts must be positive")


# ---------------------------------------------------------------- running

def _stage(name, timings, fn):
    t0 = time.perf_counter()
    try:
        out = fn()
    except Exception as exc:
        raise PipelineError(name, exc) from exc
    timings[name] = round(time.perf_counter() - t0, 3)
    log.info("stage %s done in %.2fs", name, timings[name])
    return out


def _write_manifest(out, manifest) -> str:
    path = os.path.join(out, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def run_pipeline(config: RunConfig, callback=None) -> dict:
    """Run every stage in order and return the manifest dict.

    On failure the manifest is still written (status ``failed`` and the
    stage name), earlier artifacts are kept, and :class:`PipelineError` is
    raised.
    """
    config.validate()
    case = open_case(config.case)
    econ = load_economics(_maybe_json(config.economics) or {})
    dist_doc = _maybe_json(config.distributions)
    models = load_models(dist_doc) if dist_doc else None
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    timings: dict[str, float] = {}
    artifacts: dict[str, str] = {}
    inputs = {"config": asdict(config)}
    if os.path.exists(config.case):
        inputs["case_sha256"] = hash_file(config.case)
    inputs_hash = hashlib.sha256(json.dumps(inputs, sort_keys=True, default=str).encode()).hexdigest()
    manifest = {
        "status": "running", "seed": config.seed, "inputs_sha256": inputs_hash,
        "config": asdict(config),
        "versions": {"dgplan": __version__, "numpy": np.__version__,
                     "scikit-learn": sklearn.__version__, "python": platform.python_version()},
        "artifacts": {}, "hashes": {}, "wall_time_s": timings,
    }
    try:
        siting = _stage("stage1", timings, lambda: stage1_place(case, config.n_dg, config.bound))
        artifacts["stage1"] = os.path.join(out, "siting.json")
        with open(artifacts["stage1"], "w") as fh:
            json.dump(siting.to_dict(), fh, indent=1)
            fh.write("\n")

        if config.sites:
            units = [DgUnit(str(s["kind"]).upper(), int(s["bus"]),
                            economics=econ[str(s["kind"]).upper()]) for s in config.sites]
        else:
            units = [DgUnit(k.upper(), b, economics=econ[k.upper()])
                     for k, b in zip(config.kinds, siting.buses)]
        problem = PlanningProblem(case, units, upper=config.upper_kw)

        def optimize_stage():
            est = MOALO(seed=config.seed, **config.moalo).fit(problem, callback=callback)
            return est.archive_
        archive = _stage("optimize", timings, optimize_stage)
        artifacts["optimize"] = os.path.join(out, "pareto.csv")
        write_pareto(artifacts["optimize"], units, archive.members)

        def decide_stage():
            _, X, F, feas = read_pareto(artifacts["optimize"])
            ranking, rows = decide(F, feas, config.weights)
            return ranking, rows, X
        ranking, rows, X = _stage("decide", timings, decide_stage)
        artifacts["decide"] = os.path.join(out, "ranking.csv")
        write_ranking(artifacts["decide"], ranking, [str(r) for r in rows])
        best = X[rows[ranking.best_index]]
        chosen = [DgUnit(u.kind, u.bus, float(c), u.power_factor, u.economics)
                  for u, c in zip(units, best)]
        with open(os.path.join(out, "portfolio.json"), "w") as fh:
            json.dump(portfolio_doc(chosen, dist_doc), fh, indent=1)
            fh.write("\n")

        specs = _stage("storage", timings, lambda: size_storage(
            chosen, config.omega, config.n_samples, config.seed, models))
        artifacts["storage"] = os.path.join(out, "storage.csv")
        write_storage_csv(artifacts["storage"], specs)

        for name, stor in (("ppf_without", None), ("ppf_with", specs)):
            rep = _stage(name, timings, lambda s=stor: run_ppf(
                case, chosen, s, config.n_ppf, config.seed, models))
            artifacts[name] = os.path.join(out, name)
            rep.write(artifacts[name])
            manifest.setdefault("ppf_excluded", {})[name] = rep.excluded
    except PipelineError as exc:
        manifest.update(status="failed", failed_stage=exc.stage, error=str(exc.cause))
        manifest["artifacts"] = dict(artifacts)
        _write_manifest(out, manifest)
        raise

    base = evaluate(problem, np.zeros(len(units)))
    comp = evaluate(problem, best)
    manifest["summary"] = {"base": _objective_row(base), "compromise": _objective_row(comp),
                           "portfolio": portfolio_doc(chosen)["units"]}
    manifest["status"] = "complete"
    manifest["artifacts"] = dict(artifacts)
    manifest["hashes"] = {k: hash_artifact(v) for k, v in artifacts.items()}
    _write_manifest(out, manifest)
    return manifest


def _objective_row(o: ObjectiveVector) -> dict:
    return {"c_p_pu": o.c_p, "vsf_total_pu": o.vsf_total, "p_loss_kw": o.p_loss_total,
            "feasible": bool(o.feasible)}


# ---------------------------------------------------------------- reporting

def compare(base: dict, solution: dict) -> list[dict]:
    """Base vs solution rows with percentage change.

    For losses the change is reported as a reduction, for the other two
    objectives as an increase. The base case has no benefit ratio.
    """
    rows = []
    for key, label, sign in (("c_p_pu", "investment benefit (pu)", 1.0),
                             ("vsf_total_pu", "VSF total (pu)", 1.0),
                             ("p_loss_kw", "active loss (kW)", -1.0)):
        b, s = base.get(key), solution[key]
        if key == "c_p_pu" or b in (None, 0):
            rows.append({"objective": label, "base": None, "solution": s, "change_pct": None})
            continue
        rows.append({"objective": label, "base": b, "solution": s,
                     "change_pct": sign * (s - b) / b * 100.0})
    return rows


def report(manifest) -> list[dict]:
    """Summary table for a completed run (manifest dict or path)."""
    if isinstance(manifest, (str, Path)):
        path = Path(manifest)
        if path.is_dir():
            path = path / "manifest.json"
        with open(path) as fh:
            manifest = json.load(fh)
    if manifest.get("status") != "complete" or "summary" not in manifest:
        raise ValueError("manifest is incomplete: run the pipeline to completion first")
    summary = manifest["summary"]
    return compare(summary["base"], summary["compromise"])


def format_report(rows) -> str:
    def fmt(v, nd):
        return "-" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.{nd}f}"
    lines = [f"{'objective':<26}{'base':>12}{'solution':>12}{'change %':>10}"]
    for r in rows:
        lines.append(f"{r['objective']:<26}{fmt(r['base'], 3):>12}{fmt(r['solution'], 3):>12}"
                     f"{fmt(r['change_pct'], 2):>10}")
    return "\n".join(lines)


def write_report_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["objective", "base", "solution", "change_pct"])
        for r in rows:
            out.writerow([r["objective"]] + ["" if r[k] is None else f"{r[k]:.10g}"
                                             for k in ("base", "solution", "change_pct")])
