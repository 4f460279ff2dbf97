"""Independent reference implementations used by the tests.

Nothing here imports the package's numerical code; only the case data
classes are shared. The power flow is a full AC Newton solve of the bus
power-balance equations with scipy's root finder, which has nothing in
common with the sweep solver under test.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import root


def ybus(case):
    n = len(case.buses)
    pos = {b.id: k for k, b in enumerate(case.buses)}
    zb = case.base_kv ** 2 / case.base_mva
    Y = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        y = 1.0 / complex(br.r / zb, br.x / zb)
        f, t = pos[br.from_bus], pos[br.to_bus]
        Y[f, f] += y
        Y[t, t] += y
        Y[f, t] -= y
        Y[t, f] -= y
    return Y, pos


def newton_pf(case, p_demand_kw=None, q_demand_kvar=None):
    """Solve the AC power flow; returns (complex voltages, total loss kW)."""
    sb = case.base_mva * 1000.0
    p = np.array([b.p_load for b in case.buses]) if p_demand_kw is None else np.asarray(p_demand_kw, float)
    q = np.array([b.q_load for b in case.buses]) if q_demand_kvar is None else np.asarray(q_demand_kvar, float)
    Y, pos = ybus(case)
    n = len(case.buses)
    s = [k for k, b in enumerate(case.buses) if b.kind == "swing"][0]
    others = [k for k in range(n) if k != s]
    s_inj = -(p + 1j * q) / sb

    def resid(z):
        v = np.ones(n, dtype=complex)
        v[others] = z[: n - 1] + 1j * z[n - 1:]
        mis = v * np.conj(Y @ v) - s_inj
        return np.concatenate([mis.real[others], mis.imag[others]])

    z0 = np.concatenate([np.ones(n - 1), np.zeros(n - 1)])
    sol = root(resid, z0, method="hybr", tol=1e-14)
    v = np.ones(n, dtype=complex)
    v[others] = sol.x[: n - 1] + 1j * sol.x[n - 1:]
    loss = 0.0
    zb = case.base_kv ** 2 / case.base_mva
    for br in case.branches:
        i = (v[pos[br.from_bus]] - v[pos[br.to_bus]]) / complex(br.r / zb, br.x / zb)
        loss += br.r / zb * abs(i) ** 2
    return v, loss * sb


def vsf_oracle(case, v):
    """Sum over branches of 2|V_child| - |V_parent|, orientation from a BFS from the swing bus."""
    pos = {b.id: k for k, b in enumerate(case.buses)}
    root_id = [b.id for b in case.buses if b.kind == "swing"][0]
    adj = {b.id: [] for b in case.buses}
    for br in case.branches:
        adj[br.from_bus].append(br.to_bus)
        adj[br.to_bus].append(br.from_bus)
    seen, stack, total = {root_id}, [root_id], 0.0
    while stack:
        a = stack.pop()
        for b in adj[a]:
            if b not in seen:
                seen.add(b)
                stack.append(b)
                total += 2 * abs(v[pos[b]]) - abs(v[pos[a]])
    return total


def benefit_oracle(units):
    """Annual benefit ratio with 8760 h and fixed cost in 1e4 $/kW, plain loops."""
    rev = var = fixed = 0.0
    for kind, kw in units:
        gp, gs, mc, fic, xi, cf = {
            "WT": (0.08, 0.036, 0.0047, 0.163, 0.1006, 0.35),
            "PV": (0.08, 0.036, 0.0019, 0.667, 0.0843, 0.29),
            "MT": (0.064, 0.0, 0.0283, 0.164, 0.1006, 1.00),
        }[kind]
        rev += 8760 * (gp + gs) * kw * cf
        var += 8760 * mc * kw * cf
        fixed += fic * 1e4 * kw * xi
    return rev / (var + fixed)


def quantile_oracle(samples, omega):
    """Walk the sorted samples from the top down and keep the last level meeting coverage."""
    s = sorted(float(x) for x in samples)
    n = len(s)
    best = s[-1]
    for k in range(n, 0, -1):
        # coverage of q = s[k-1] counts every sample <= it
        q = s[k - 1]
        covered = sum(1 for x in s if x <= q)
        if covered / n >= omega:
            best = q
        else:
            break
    return max(best, 0.0)


def grp_oracle(F, senses, weights=None, rho=0.5):
    """Grey relation projection membership with explicit loops."""
    m, k = len(F), len(F[0])
    w = [1.0 / k] * k if weights is None else [x / sum(weights) for x in weights]
    y = [[0.0] * k for _ in range(m)]
    for j in range(k):
        col = [F[i][j] for i in range(m)]
        lo, hi = min(col), max(col)
        for i in range(m):
            if hi == lo:
                y[i][j] = 1.0
            elif senses[j] == "max":
                y[i][j] = (F[i][j] - lo) / (hi - lo)
            else:
                y[i][j] = (hi - F[i][j]) / (hi - lo)

    def coeffs(target):
        d = [[abs(target - y[i][j]) for j in range(k)] for i in range(m)]
        flat = [x for row in d for x in row]
        dmin, dmax = min(flat), max(flat)
        if dmax == 0:
            return [[1.0] * k for _ in range(m)]
        return [[(dmin + rho * dmax) / (d[i][j] + rho * dmax) for j in range(k)] for i in range(m)]

    norm = math.sqrt(sum(x * x for x in w))
    proj = lambda row: sum(g * x * x for g, x in zip(row, w)) / norm  # noqa: E731
    gp, gm = coeffs(1.0), coeffs(0.0)
    v0 = proj([1.0] * k)
    out = []
    for i in range(m):
        a = (v0 - proj(gm[i])) ** 2
        b = (v0 - proj(gp[i])) ** 2
        out.append(a / (a + b) if a + b > 0 else 0.5)
    return out


def weakly_dominates(a, b, senses):
    better = False
    for x, y, s in zip(a, b, senses):
        if s == "max":
            x, y = -x, -y
        if x > y:
            return False
        if x < y:
            better = True
    return better


def hausdorff(A, B):
    d = np.sqrt(((np.asarray(A)[:, None, :] - np.asarray(B)[None, :, :]) ** 2).sum(-1))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def analytic_front(step=0.01):
    t = np.arange(0.0, 2.0 + step / 2, step)
    return np.column_stack([t ** 2, (t - 2) ** 2])


def random_radial_case(rng, n, make_case):
    """Random tree of ``n`` buses with feeder-like impedances (ohm) and loads (kW, kVar)."""
    buses = [(1, "swing", 0.0, 0.0)]
    buses += [(i, "load", float(rng.uniform(0, 300)), float(rng.uniform(0, 200))) for i in range(2, n + 1)]
    branches = [(i - 1, int(rng.integers(1, i)), i, float(rng.uniform(0.05, 1.0)),
                 float(rng.uniform(0.05, 1.0))) for i in range(2, n + 1)]
    return make_case(buses, branches)
