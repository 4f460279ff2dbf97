"""Backward/forward sweep power flow for radial feeders, plus loss formulas.

The sweep is written with two path-incidence matrices: ``bibc`` maps bus
injection currents to branch currents (backward sweep, leaf to root) and
``bcbv`` maps branch currents to bus voltage drops (forward sweep, root to
leaf). That keeps each iteration a pair of mat-vec products and lets many
Monte Carlo scenarios be solved as one batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import NetworkCase

TOL = 1e-6
MAX_ITER = 100
COLLAPSE_PU = 0.5


class PowerFlowDivergence(RuntimeError):
    """Voltage collapsed below 0.5 pu (or went non-finite) during the sweep."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = list(trace)


class SingularNetworkError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Injection:
    """Power injected at a bus in kW/kVar (positive = generation)."""

    bus: int
    p: float
    q: float = 0.0


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    u: np.ndarray           # |V| per bus, pu, case bus order
    delta: np.ndarray       # angle per bus, rad
    branch_p: np.ndarray    # receiving-end flow per branch (case.ordered order), kW
    branch_q: np.ndarray    # kVar
    branch_i: np.ndarray    # complex branch current, pu
    p_loss: float
    q_loss: float
    p_swing: float
    q_swing: float
    converged: bool
    iterations: int
    mismatch: float         # max per-bus |S| mismatch, pu
    p_demand: np.ndarray    # net demand used for the solve, kW
    q_demand: np.ndarray
    trace: list = field(default_factory=list, repr=False)

    @property
    def voltage(self) -> np.ndarray:
        return self.u * np.exp(1j * self.delta)


class _Topology:
    def __init__(self, case: NetworkCase):
        n = case.n_bus
        idx = case.index
        order = case.ordered
        self.n = n
        self.swing = idx[case.swing.id]
        self.frm = np.array([idx[br.from_bus] for br in order], dtype=int)
        self.to = np.array([idx[br.to_bus] for br in order], dtype=int)
        self.branch_ids = [br.id for br in order]
        self.position = {bid: k for k, bid in enumerate(self.branch_ids)}
        self.r = np.array([br.r for br in order]) / case.z_base
        self.x = np.array([br.x for br in order]) / case.z_base
        self.z = self.r + 1j * self.x
        nb = len(order)
        # incoming branch of each bus
        inc = np.full(n, -1)
        inc[self.to] = np.arange(nb)
        # bibc[k, i] = 1 if bus i is downstream of (or at the end of) branch k
        bibc = np.zeros((nb, n))
        for i in range(n):
            b = i
            while inc[b] >= 0:
                bibc[inc[b], i] = 1.0
                b = self.frm[inc[b]]
        self.bibc = bibc
        self.bcbv = bibc.T * self.z[None, :]


def topology(case: NetworkCase) -> _Topology:
    topo = case.__dict__.get("_pf_topology")
    if topo is None:
        topo = _Topology(case)
        case.__dict__["_pf_topology"] = topo
    return topo


def net_demand(case: NetworkCase, injections=()) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus net demand (load minus injection) in kW/kVar, case bus order."""
    p = case.p_load.copy()
    q = case.q_load.copy()
    swing = case.swing.id
    for inj in injections:
        if inj.bus == swing:
            raise ValueError("injections at the swing bus are not allowed")
        if inj.bus not in case.index:
            raise KeyError(f"unknown bus id {inj.bus}")
        i = case.index[inj.bus]
        p[i] -= inj.p
        q[i] -= inj.q
    return p, q


def _sweep(topo: _Topology, s, tol, max_iter):
    """Fixed-point iteration on a (T, N) batch of complex demands in pu.

    Returns (V, branch currents, converged mask, iterations, trace of max dV).
    """
    s = np.atleast_2d(s)
    v = np.ones_like(s, dtype=complex)
    active = np.ones(s.shape[0], dtype=bool)
    iters = np.zeros(s.shape[0], dtype=int)
    collapsed = np.zeros(s.shape[0], dtype=bool)
    trace = []
    ib = np.zeros((s.shape[0], topo.bibc.shape[0]), dtype=complex)
    for it in range(1, max_iter + 1):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        cur = np.conj(s[rows] / v[rows])
        cur[:, topo.swing] = 0.0
        ib_new = cur @ topo.bibc.T
        v_new = 1.0 - ib_new @ topo.bcbv.T
        dv = np.max(np.abs(v_new - v[rows]), axis=1) if v_new.shape[1] else np.zeros(rows.size)
        v[rows] = v_new
        ib[rows] = ib_new
        iters[rows] = it
        trace.append(float(dv.max()) if dv.size else 0.0)
        bad = ~np.isfinite(v_new).all(axis=1) | (np.abs(v_new).min(axis=1, initial=1.0) < COLLAPSE_PU)
        collapsed[rows[bad]] = True
        done = (dv < tol) | bad
        active[rows[done]] = False
    converged = ~active & ~collapsed
    return v, ib, converged, collapsed, iters, trace


def solve(case: NetworkCase, injections=(), tol: float = TOL,
          max_iter: int = MAX_ITER) -> PowerFlowSolution:
    """Solve the feeder with the given DG injections.

    Swing bus held at 1.0 pu, 0 rad. Hitting ``max_iter`` returns a solution
    with ``converged=False``; a voltage collapse raises PowerFlowDivergence.
    """
    p, q = net_demand(case, injections)
    return solve_demand(case, p, q, tol=tol, max_iter=max_iter)


def solve_demand(case: NetworkCase, p_demand, q_demand, tol: float = TOL,
                 max_iter: int = MAX_ITER) -> PowerFlowSolution:
    """Like :func:`solve` but takes per-bus net demand arrays (kW/kVar) directly."""
    topo = topology(case)
    s = (np.asarray(p_demand, float) + 1j * np.asarray(q_demand, float)) / case.s_base_kva
    v, ib, conv, collapsed, iters, trace = _sweep(topo, s[None, :], tol, max_iter)
    if collapsed[0]:
        raise PowerFlowDivergence(
            f"voltage collapse below {COLLAPSE_PU} pu after {iters[0]} iterations", trace)
    return _package(case, topo, s, v[0], ib[0], bool(conv[0]), int(iters[0]), trace)


def _package(case, topo, s, v, ib, converged, iterations, trace):
    sb = case.s_base_kva
    s_recv = v[topo.to] * np.conj(ib)
    loss = topo.z * np.abs(ib) ** 2
    root = topo.frm == topo.swing
    s_swing = v[topo.swing] * np.conj(ib[root].sum())
    # bus power actually consumed, from branch currents entering/leaving each bus
    i_bus = np.zeros(topo.n, dtype=complex)
    np.add.at(i_bus, topo.to, ib)
    np.add.at(i_bus, topo.frm, -ib)
    consumed = v * np.conj(i_bus)
    mis = np.abs(np.delete(consumed - s, topo.swing))
    return PowerFlowSolution(
        u=np.abs(v), delta=np.angle(v),
        branch_p=s_recv.real * sb, branch_q=s_recv.imag * sb, branch_i=ib,
        p_loss=float(loss.real.sum() * sb), q_loss=float(loss.imag.sum() * sb),
        p_swing=float(s_swing.real * sb), q_swing=float(s_swing.imag * sb),
        converged=converged, iterations=iterations,
        mismatch=float(mis.max()) if mis.size else 0.0,
        p_demand=s.real * sb, q_demand=s.imag * sb, trace=trace)


@dataclass(frozen=True, eq=False)
class BatchSolution:
    """Vectorized results for T scenarios: arrays have a leading trial axis."""

    u: np.ndarray
    delta: np.ndarray
    p_loss: np.ndarray
    q_loss: np.ndarray
    converged: np.ndarray


def solve_batch(case: NetworkCase, p_demand, q_demand, tol: float = TOL,
                max_iter: int = MAX_ITER) -> BatchSolution:
    """Solve T independent scenarios given (T, N) net demand arrays in kW/kVar.

    Collapsed or non-converged trials are flagged in ``converged``, never raised.
    """
    topo = topology(case)
    s = (np.asarray(p_demand, float) + 1j * np.asarray(q_demand, float)) / case.s_base_kva
    v, ib, conv, _, _, _ = _sweep(topo, s, tol, max_iter)
    loss = (np.abs(ib) ** 2) @ np.stack([topo.r, topo.x], axis=1) * case.s_base_kva
    return BatchSolution(u=np.abs(v), delta=np.angle(v), p_loss=loss[:, 0],
                         q_loss=loss[:, 1], converged=conv)


def branch_loss(case: NetworkCase, solution: PowerFlowSolution, m: int) -> float:
    """Active loss (kW) of branch ``m`` from its receiving-end flow and voltage."""
    topo = topology(case)
    if m not in topo.position:
        raise KeyError(f"unknown branch id {m}")
    k = topo.position[m]
    sb = case.s_base_kva
    p = solution.branch_p[k] / sb
    q = solution.branch_q[k] / sb
    u = solution.u[topo.to[k]]
    return float(topo.r[k] * (p * p + q * q) / (u * u) * sb)


def total_loss(case: NetworkCase, solution: PowerFlowSolution) -> float:
    """Sum of :func:`branch_loss` over every branch, kW."""
    topo = topology(case)
    sb = case.s_base_kva
    p = solution.branch_p / sb
    q = solution.branch_q / sb
    u = solution.u[topo.to]
    return float(np.sum(topo.r * (p * p + q * q) / (u * u)) * sb)


def resistance_matrix(case: NetworkCase) -> tuple[np.ndarray, np.ndarray]:
    """Real part of the bus impedance matrix over non-swing buses.

    Built by inverting the bus admittance matrix with the swing row/column
    removed. Returns ``(R, buses)`` with ``buses`` the case positions of the
    rows.
    """
    cached = case.__dict__.get("_pf_rbus")
    if cached is not None:
        return cached
    topo = topology(case)
    if np.any(topo.z == 0):
        raise SingularNetworkError("zero-impedance branch makes the admittance matrix singular")
    y = np.zeros((topo.n, topo.n), dtype=complex)
    yb = 1.0 / topo.z
    for f, t, a in zip(topo.frm, topo.to, yb):
        y[f, f] += a
        y[t, t] += a
        y[f, t] -= a
        y[t, f] -= a
    keep = np.array([i for i in range(topo.n) if i != topo.swing], dtype=int)
    try:
        z = np.linalg.inv(y[np.ix_(keep, keep)])
    except np.linalg.LinAlgError as exc:
        raise SingularNetworkError(str(exc)) from None
    out = (z.real, keep)
    case.__dict__["_pf_rbus"] = out
    return out


def loss_coefficients(case: NetworkCase, solution: PowerFlowSolution):
    """Exact-loss coefficient matrices ``alpha``, ``beta`` over non-swing buses."""
    r, keep = resistance_matrix(case)
    u = solution.u[keep]
    d = solution.delta[keep]
    dd = d[:, None] - d[None, :]
    scale = r / np.outer(u, u)
    return scale * np.cos(dd), scale * np.sin(dd), keep


def exact_loss(case: NetworkCase, solution: PowerFlowSolution) -> float:
    """Total active loss (kW) from the bus-pair loss formula.

    Uses the net injections the solution was computed with.
    """
    alpha, beta, keep = loss_coefficients(case, solution)
    sb = case.s_base_kva
    p = -solution.p_demand[keep] / sb
    q = -solution.q_demand[keep] / sb
    val = p @ alpha @ p + q @ alpha @ q + q @ beta @ p - p @ beta @ q
    return float(val * sb)
