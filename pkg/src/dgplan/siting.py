"""Stage 1: loss-sensitivity siting and greedy initial sizing of DG units."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .network import NetworkCase
from .powerflow import PowerFlowDivergence, loss_coefficients, solve, solve_demand

RESOLUTION_KW = 0.1
COARSE_POINTS = 100
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def loss_sensitivity(case: NetworkCase, solution) -> np.ndarray:
    """dP_loss/dP_demand at every bus, from the exact-loss coefficients.

    Returned in case bus order; the swing entry is 0. Net demand (load minus
    generation) is the variable, so a large positive value marks a bus where
    injecting active power cuts losses the most.
    """
    alpha, beta, keep = loss_coefficients(case, solution)
    sb = case.s_base_kva
    p = solution.p_demand[keep] / sb
    q = solution.q_demand[keep] / sb
    out = np.zeros(case.n_bus)
    out[keep] = 2.0 * (alpha @ p - beta @ q)
    return out


def _loss_with(case, p_demand, q_demand, i, kw):
    p = p_demand.copy()
    p[i] -= kw
    try:
        sol = solve_demand(case, p, q_demand)
    except PowerFlowDivergence:
        return math.inf
    return sol.p_loss if sol.converged else math.inf


def golden_section(f, lo: float, hi: float, tol: float = RESOLUTION_KW) -> float:
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def size_bound(case: NetworkCase, bus: int, p_demand=None, bound: str = "penetration",
               p_lo: float | None = None) -> float:
    """Upper limit for a single DG at ``bus`` (kW).

    ``penetration``: total load plus base-case loss, minus DG already placed
    (the headroom left under the penetration limit). ``downstream``: active
    load of the bus and everything it feeds.
    """
    if bound == "downstream":
        return case.downstream_load(bus)
    if bound != "penetration":
        raise ValueError(f"unknown bound {bound!r}")
    if p_lo is None:
        p_lo = solve(case).p_loss
    placed = 0.0 if p_demand is None else float(case.p_load.sum() - np.sum(p_demand))
    return max(0.0, float(case.p_load.sum()) + p_lo - placed)


def optimal_size_at(case: NetworkCase, bus: int, p_demand=None, q_demand=None,
                    bound: str = "penetration", p_lo: float | None = None) -> float:
    """Loss-minimising active injection at ``bus`` to 0.1 kW.

    A 100-point sweep over ``[0, bound]`` brackets the minimum, then
    golden-section refines inside the bracket.
    """
    if bus == case.swing.id:
        raise ValueError("cannot size a DG at the swing bus")
    p_demand = case.p_load if p_demand is None else np.asarray(p_demand, float)
    q_demand = case.q_load if q_demand is None else np.asarray(q_demand, float)
    i = case.index[bus]
    hi = size_bound(case, bus, p_demand, bound, p_lo)
    if hi <= 0:
        return 0.0
    f = lambda kw: _loss_with(case, p_demand, q_demand, i, kw)  # noqa: E731
    grid = np.linspace(0.0, hi, COARSE_POINTS + 1)
    vals = np.array([f(g) for g in grid])
    k = int(np.argmin(vals))
    lo_k, hi_k = grid[max(k - 1, 0)], grid[min(k + 1, COARSE_POINTS)]
    best = golden_section(f, lo_k, hi_k)
    # the endpoints are admissible too
    cands = [(f(best), best), (vals[0], 0.0), (vals[-1], hi)]
    loss, size = min(cands, key=lambda t: (t[0], t[1]))
    return round(float(size), 1) if size > 0 else 0.0


@dataclass
class SitingResult:
    placements: list[tuple[int, float]]
    loss_after_each: list[float]
    base_loss: float = 0.0
    lsf_history: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def buses(self) -> list[int]:
        return [b for b, _ in self.placements]

    @property
    def capacities(self) -> list[float]:
        return [c for _, c in self.placements]

    def to_dict(self) -> dict:
        return {"placements": [{"bus": b, "capacity_kw": c} for b, c in self.placements],
                "loss_after_each_kw": self.loss_after_each, "base_loss_kw": self.base_loss}


def stage1_place(case: NetworkCase, n_dg: int, bound: str = "penetration") -> SitingResult:
    """Greedy siting: highest-sensitivity bus, size it, fold it into the load, repeat.

    Stops early once the penetration limit leaves no headroom or the best
    size rounds to zero. Ties in sensitivity go to the lowest bus id.
    """
    candidates = [b.id for b in case.buses if b.kind != "swing"]
    if not 1 <= n_dg <= len(candidates):
        raise ValueError(f"n_dg must be between 1 and {len(candidates)}")
    p = case.p_load.copy()
    q = case.q_load.copy()
    base = solve(case)
    p_lo = base.p_loss
    limit = float(case.p_load.sum()) + p_lo
    result = SitingResult([], [], base_loss=p_lo)
    sol = base
    placed: set[int] = set()
    for _ in range(n_dg):
        lsf = loss_sensitivity(case, sol)
        result.lsf_history.append(lsf)
        order = sorted((b for b in candidates if b not in placed),
                       key=lambda b: (-lsf[case.index[b]], b))
        bus = order[0]
        size = optimal_size_at(case, bus, p, q, bound=bound, p_lo=p_lo)
        already = float(case.p_load.sum() - p.sum())
        if size <= 0 or already + size > limit + 1e-9:
            break
        p[case.index[bus]] -= size
        sol = solve_demand(case, p, q)
        placed.add(bus)
        result.placements.append((bus, size))
        result.loss_after_each.append(sol.p_loss)
    return result


class LossSensitivitySiting(BaseEstimator):
    """Estimator wrapper around :func:`stage1_place`.

    ``fit(case)`` sets ``placements_``, ``buses_``, ``capacities_`` and
    ``loss_after_each_``.
    """

    def __init__(self, n_dg: int = 4, bound: str = "penetration"):
        self.n_dg = n_dg
        self.bound = bound

    def fit(self, case: NetworkCase, y=None):
        res = stage1_place(case, self.n_dg, bound=self.bound)
        self.result_ = res
        self.placements_ = res.placements
        self.buses_ = np.array(res.buses, dtype=int)
        self.capacities_ = np.array(res.capacities)
        self.loss_after_each_ = np.array(res.loss_after_each)
        return self
