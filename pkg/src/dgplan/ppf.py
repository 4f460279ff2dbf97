"""Monte Carlo probabilistic power flow with optional storage compensation."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import NetworkCase
from .objectives import DgUnit
from .powerflow import solve_batch
from .stochastic import sample_outputs
from .storage import StorageSpec

BATCH = 2000
MAX_EXCLUDED = 1e-3


class PpfFailure(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CdfSeries:
    """Empirical CDF: sorted values with cumulative probabilities ``i/n``."""

    label: str
    units: str
    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, float))
        if v.size == 0:
            raise ValueError("empty CDF")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def probs(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n

    def cdf(self, x) -> np.ndarray | float:
        """``P{X <= x}`` (right-continuous)."""
        out = np.searchsorted(self.values, x, side="right") / self.n
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, p: float) -> float:
        """Lower quantile: smallest value whose CDF reaches ``p``."""
        if not 0 < p <= 1:
            raise ValueError("p must be in (0, 1]")
        k = max(1, math.ceil(p * self.n - 1e-9))
        return float(self.values[k - 1])

    def prob_at_least(self, x: float) -> float:
        return float(np.mean(self.values >= x))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow([f"value_{self.units}", "cum_prob"])
            for v, p in zip(self.values, self.probs):
                out.writerow([f"{v:.10g}", f"{p:.10g}"])


@dataclass(eq=False)
class PpfReport:
    scenario: str
    n: int
    seed: int
    voltages: dict[int, CdfSeries]
    p_loss: CdfSeries
    q_loss: CdfSeries
    outputs: dict[int, CdfSeries]
    excluded: int = 0
    rated: dict[int, float] = field(default_factory=dict)

    def series(self) -> dict[str, CdfSeries]:
        out = {"p_loss": self.p_loss, "q_loss": self.q_loss}
        out.update({f"voltage_bus{b}": s for b, s in self.voltages.items()})
        out.update({f"output_bus{b}": s for b, s in self.outputs.items()})
        return out

    def write(self, directory) -> list[str]:
        os.makedirs(directory, exist_ok=True)
        paths = []
        for name, s in self.series().items():
            path = os.path.join(directory, f"{self.scenario}_{name}.csv")
            s.write_csv(path)
            paths.append(path)
        return paths


def effective_output(sample, rated, p_reest):
    """DG plus storage output: the shortfall is covered up to ``p_reest``.

    Written as a comparison on the shortfall so a trial whose shortfall is
    within the reserve lands exactly on ``rated``.
    """
    s = np.asarray(sample, float)
    if np.any(s < 0) or np.any(np.asarray(rated) < 0) or np.any(np.asarray(p_reest) < 0):
        raise ValueError("inputs must be non-negative")
    gap = np.asarray(rated, float) - s
    out = np.where(gap <= p_reest, np.broadcast_to(rated, gap.shape), s + p_reest)
    return float(out) if out.ndim == 0 else out


def run_ppf(case: NetworkCase, portfolio: Sequence[DgUnit],
            storage: Sequence[StorageSpec] | None = None, n: int = 10_000, seed: int = 0,
            models: dict | None = None, scenario: str | None = None) -> PpfReport:
    """Sample DG outputs, apply storage, and solve ``n`` power flows in batches."""
    if n < 1:
        raise ValueError("n must be >= 1")
    portfolio = list(portfolio)
    reserve = {s.bus: s.p_reest for s in (storage or [])}
    sets = sample_outputs(portfolio, n, seed, models)
    outputs: dict[int, np.ndarray] = {}
    p = np.tile(case.p_load, (n, 1))
    q = np.tile(case.q_load, (n, 1))
    for u, ss in zip(portfolio, sets):
        out = ss.samples
        if u.bus in reserve:
            out = effective_output(out, u.s_rated, reserve[u.bus])
        outputs[u.bus] = outputs.get(u.bus, 0.0) + out
        i = case.index[u.bus]
        p[:, i] -= out
        q[:, i] -= out * math.tan(math.acos(u.power_factor))
    u_all = np.empty((n, case.n_bus))
    pl = np.empty(n)
    ql = np.empty(n)
    ok = np.empty(n, bool)
    for a in range(0, n, BATCH):
        b = min(n, a + BATCH)
        sol = solve_batch(case, p[a:b], q[a:b])
        u_all[a:b], pl[a:b], ql[a:b], ok[a:b] = sol.u, sol.p_loss, sol.q_loss, sol.converged
    excluded = int((~ok).sum())
    if excluded >= MAX_EXCLUDED * n and excluded > 0:
        raise PpfFailure(f"{excluded} of {n} trials did not converge")
    swing = case.swing.id
    voltages = {b.id: CdfSeries(f"voltage bus {b.id}", "pu", u_all[ok, case.index[b.id]])
                for b in case.buses if b.id != swing}
    rated = {}
    for u in portfolio:
        rated[u.bus] = rated.get(u.bus, 0.0) + u.s_rated
    tag = scenario or ("with_storage" if reserve else "without_storage")
    return PpfReport(
        scenario=tag, n=n, seed=seed, voltages=voltages,
        p_loss=CdfSeries("active loss", "kw", pl[ok]),
        q_loss=CdfSeries("reactive loss", "kvar", ql[ok]),
        outputs={bus: CdfSeries(f"DG output bus {bus}", "kw", v) for bus, v in outputs.items()},
        excluded=excluded, rated=rated)


def min_voltage_bus(report: PpfReport) -> int:
    """Bus with the lowest median voltage; ties go to the lowest bus id."""
    if not report.voltages:
        raise ValueError("report has no voltage series")
    return min(report.voltages, key=lambda b: (float(np.median(report.voltages[b].values)), b))


def voltage_band(report: PpfReport, bus: int, p_lo: float = 0.6, p_hi: float = 1.0):
    """Voltage range covered between two cumulative-probability levels."""
    s = report.voltages[bus]
    return s.quantile(p_lo), s.quantile(p_hi)


def dominates_left(a: CdfSeries, b: CdfSeries) -> bool:
    """True if every quantile of ``a`` is at most the matching quantile of ``b``.

    Both series must hold the same number of points.
    """
    if a.n != b.n:
        raise ValueError("series lengths differ")
    return bool(np.all(a.values <= b.values + 1e-12))
