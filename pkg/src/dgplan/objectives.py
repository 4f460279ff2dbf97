"""Planning objectives (investment benefit, voltage stability, losses) and constraints."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .network import NetworkCase
from .powerflow import (Injection, PowerFlowDivergence, PowerFlowSolution, net_demand,
                        solve, solve_demand, topology)

HOURS_PER_YEAR = 8760
FIC_SCALE = 1e4          # fixed investment cost is quoted in units of 1e4 $/kW
SENSES = ("max", "max", "min")
OBJECTIVE_NAMES = ("c_p", "vsf_total", "p_loss_kw")
KINDS = ("WT", "PV", "MT")

# sentinel objectives for a candidate whose power flow did not converge
WORST = (0.0, 0.0, 1e12)


class UndefinedBenefitError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class DgEconomics:
    c_gp: float       # on-grid price, $/kWh
    c_gs: float       # subsidy, $/kWh
    c_mc: float       # maintenance, $/kWh
    c_fic: float      # fixed investment, in units of fic_scale $/kW
    xi_dg: float      # annual conversion factor of the fixed cost
    lambda_cf: float  # capacity factor
    fic_scale: float = FIC_SCALE

    def __post_init__(self):
        vals = (self.c_gp, self.c_gs, self.c_mc, self.c_fic, self.xi_dg, self.lambda_cf)
        if any(v < 0 for v in vals) or self.lambda_cf > 1:
            raise ValueError("economics must be non-negative with lambda_cf <= 1")


DEFAULT_ECONOMICS = {
    "WT": DgEconomics(c_gp=0.08, c_gs=0.036, c_mc=0.0047, c_fic=0.163, xi_dg=0.1006, lambda_cf=0.35),
    "PV": DgEconomics(c_gp=0.08, c_gs=0.036, c_mc=0.0019, c_fic=0.667, xi_dg=0.0843, lambda_cf=0.29),
    "MT": DgEconomics(c_gp=0.064, c_gs=0.0, c_mc=0.0283, c_fic=0.164, xi_dg=0.1006, lambda_cf=1.00),
}


def load_economics(path_or_dict) -> dict[str, DgEconomics]:
    """Read ``{"WT": {"c_gp":..., ...}, ...}``; missing kinds keep the defaults."""
    doc = path_or_dict
    if not isinstance(doc, dict):
        with open(doc) as fh:
            doc = json.load(fh)
    out = dict(DEFAULT_ECONOMICS)
    for kind, row in doc.items():
        out[kind.upper()] = replace(DEFAULT_ECONOMICS.get(kind.upper(), DEFAULT_ECONOMICS["MT"]), **row)
    return out


@dataclass(frozen=True)
class DgUnit:
    kind: str
    bus: int
    s_rated: float = 0.0          # kW
    power_factor: float = 1.0
    economics: DgEconomics | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown DG kind {self.kind!r}")
        if self.s_rated < 0:
            raise ValueError("s_rated must be non-negative")
        if not 0 < self.power_factor <= 1:
            raise ValueError("power_factor must be in (0, 1]")
        if self.economics is None:
            object.__setattr__(self, "economics", DEFAULT_ECONOMICS[self.kind])

    @property
    def q_rated(self) -> float:
        return self.s_rated * math.tan(math.acos(self.power_factor))

    def injection(self, p: float | None = None) -> Injection:
        p = self.s_rated if p is None else p
        return Injection(self.bus, p, p * math.tan(math.acos(self.power_factor)))


@dataclass(frozen=True)
class ObjectiveVector:
    c_p: float
    vsf_total: float
    p_loss_total: float
    feasible: bool = True
    violation: float = 0.0

    @property
    def values(self) -> tuple[float, float, float]:
        return (self.c_p, self.vsf_total, self.p_loss_total)


def investment_benefit(portfolio: Sequence[DgUnit], hours: float = HOURS_PER_YEAR) -> float:
    """Annual revenue over annualised cost for a DG portfolio (per unit)."""
    revenue = cost_var = cost_fixed = 0.0
    for u in portfolio:
        e = u.economics
        revenue += (e.c_gp + e.c_gs) * u.s_rated * e.lambda_cf
        cost_var += e.c_mc * u.s_rated * e.lambda_cf
        cost_fixed += e.c_fic * e.fic_scale * u.s_rated * e.xi_dg
    cost = hours * cost_var + cost_fixed
    if cost <= 0:
        raise UndefinedBenefitError("investment benefit undefined for a zero-capacity portfolio")
    return hours * revenue / cost


def vsf(case: NetworkCase, solution: PowerFlowSolution) -> tuple[np.ndarray, float]:
    """Per-branch voltage stability factor ``2 U_recv - U_send`` and its sum.

    The per-branch array follows ``case.ordered``.
    """
    topo = topology(case)
    per = 2.0 * solution.u[topo.to] - solution.u[topo.frm]
    return per, float(per.sum())


def constraint_violation(case: NetworkCase, solution: PowerFlowSolution,
                         p_dg: float, q_dg: float, p_lo: float, q_lo: float) -> float:
    """Aggregate ``max(0, excess)`` over voltage, penetration and branch-rating limits.

    Voltage terms are in pu; power terms are divided by the system base so the
    sum is dimensionless.
    """
    sb = case.s_base_kva
    topo = topology(case)
    umin = np.array([b.u_min for b in case.buses])
    umax = np.array([b.u_max for b in case.buses])
    v_viol = np.maximum(0.0, umin - solution.u).sum() + np.maximum(0.0, solution.u - umax).sum()
    pen = (max(0.0, p_dg - (case.p_load.sum() + p_lo))
           + max(0.0, q_dg - (case.q_load.sum() + q_lo))) / sb
    rated = np.array([br.s_rated for br in case.ordered])
    s_send = np.abs(solution.voltage[topo.frm] * np.conj(solution.branch_i)) * sb
    s_recv = np.hypot(solution.branch_p, solution.branch_q)
    flow = np.maximum(s_send, s_recv)
    b_viol = np.maximum(0.0, flow - rated).sum() / sb
    # tiny negatives from rounding are not violations
    total = float(v_viol + pen + b_viol)
    return total if total > 1e-12 else 0.0


@dataclass
class PlanningProblem:
    """DG capacity sizing on fixed sites: maps a capacity vector to objectives."""

    case: NetworkCase
    units: Sequence[DgUnit]
    lower: Sequence[float] | None = None
    upper: Sequence[float] | None = None
    hours: float = HOURS_PER_YEAR
    _base: PowerFlowSolution | None = field(default=None, repr=False)

    def __post_init__(self):
        self.units = list(self.units)
        swing = self.case.swing.id
        for u in self.units:
            if u.bus == swing or u.bus not in self.case.index:
                raise ValueError(f"DG bus {u.bus} must be an existing non-swing bus")
        n = len(self.units)
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, float)
        if self.upper is None:
            self.upper = np.full(n, float(self.case.p_load.sum()))
        self.upper = np.asarray(self.upper, float)
        if self.lower.shape != (n,) or self.upper.shape != (n,) or np.any(self.lower > self.upper):
            raise ValueError("bounds must match the number of DG sites with lower <= upper")

    @property
    def dim(self) -> int:
        return len(self.units)

    @property
    def base(self) -> PowerFlowSolution:
        if self._base is None:
            self._base = solve(self.case)
        return self._base

    def portfolio(self, x) -> list[DgUnit]:
        return [replace(u, s_rated=float(c)) for u, c in zip(self.units, x)]

    def evaluate(self, x) -> ObjectiveVector:
        return evaluate(self, x)

    __call__ = evaluate


def evaluate(problem: PlanningProblem, candidate) -> ObjectiveVector:
    """Objectives and constraint violation with every DG at rated output.

    Infeasibility and non-convergence are reported in the result, never raised.
    """
    x = np.asarray(candidate, float)
    if x.shape != (problem.dim,):
        raise ValueError(f"candidate must have length {problem.dim}")
    if np.any(x < problem.lower - 1e-9) or np.any(x > problem.upper + 1e-9):
        raise ValueError("candidate outside box bounds")
    case = problem.case
    units = problem.portfolio(x)
    p, q = net_demand(case, [u.injection() for u in units])
    try:
        sol = solve_demand(case, p, q)
    except PowerFlowDivergence:
        sol = None
    if sol is None or not sol.converged:
        return ObjectiveVector(*WORST, feasible=False, violation=1e6)
    _, vsf_total = vsf(case, sol)
    try:
        c_p = investment_benefit(units, problem.hours)
    except UndefinedBenefitError:
        c_p = 0.0
    base = problem.base
    viol = constraint_violation(case, sol, float(x.sum()), sum(u.q_rated for u in units),
                                base.p_loss, base.q_loss)
    return ObjectiveVector(c_p, vsf_total, sol.p_loss, feasible=viol == 0.0, violation=viol)


def objective_dict(obj: ObjectiveVector) -> dict:
    return asdict(obj)
