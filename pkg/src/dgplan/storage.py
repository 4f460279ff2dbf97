"""Chance-constrained sizing of storage output at stochastic DG buses.

The storage at a site must cover the gap between rated and actual DG
output with probability at least ``omega``. Over Monte Carlo samples that
is a lower empirical quantile of the shortfall distribution.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .objectives import DgUnit
from .stochastic import SampleSet, sample_outputs

STOCHASTIC_KINDS = ("WT", "PV")


@dataclass(frozen=True)
class StorageSpec:
    bus: int
    p_reest: float     # kW
    omega: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.p_reest < 0:
            raise ValueError("p_reest must be non-negative")
        if not 0 < self.omega < 1:
            raise ValueError("omega must be in (0, 1)")


def shortfall_samples(rated: Sequence[float], samples: Sequence) -> list[np.ndarray]:
    """Per-site shortfall ``rated - output`` for every sample, kW."""
    arrays = [np.asarray(s.samples if isinstance(s, SampleSet) else s, float) for s in samples]
    if len(arrays) != len(rated):
        raise ValueError("one rated value per sample set is required")
    if arrays and any(len(a) != len(arrays[0]) for a in arrays):
        raise ValueError("sample sets must have equal length")
    return [float(r) - a for r, a in zip(rated, arrays)]


def _coverage_count(n: int, omega: float) -> int:
    """Smallest k in 1..n with k/n >= omega, evaluated in floating point."""
    k = max(1, min(n, math.ceil(omega * n)))
    while k > 1 and (k - 1) / n >= omega:
        k -= 1
    while k < n and k / n < omega:
        k += 1
    return k


def reserve_output(r_e, omega: float) -> float:
    """Minimal reserve ``q >= 0`` with ``P{shortfall <= q} >= omega`` on the samples.

    The answer is the lower empirical quantile: the k-th smallest sample
    where k is the least count reaching coverage ``omega``.
    """
    r = np.asarray(r_e, float).ravel()
    if r.size == 0:
        raise ValueError("reserve_output needs at least one sample")
    if not 0 < omega < 1:
        raise ValueError("omega must be in (0, 1)")
    k = _coverage_count(r.size, omega)
    q = float(np.partition(r, k - 1)[k - 1])
    return max(q, 0.0)


def size_storage(portfolio: Sequence[DgUnit], omega: float, n: int, seed: int,
                 models: dict | None = None) -> list[StorageSpec]:
    """One :class:`StorageSpec` per WT/PV site; micro-turbines need none."""
    sites = [u for u in portfolio if u.kind in STOCHASTIC_KINDS]
    if not sites:
        return []
    sets = sample_outputs(sites, n, seed, models)
    gaps = shortfall_samples([u.s_rated for u in sites], sets)
    return [StorageSpec(u.bus, reserve_output(g, omega), omega, n, seed)
            for u, g in zip(sites, gaps)]


class ChanceConstrainedStorage(BaseEstimator):
    """Estimator wrapper: ``fit(portfolio)`` sets ``specs_`` and ``p_reest_``."""

    def __init__(self, omega: float = 0.60, n_samples: int = 100_000, seed: int = 0,
                 models: dict | None = None):
        self.omega = omega
        self.n_samples = n_samples
        self.seed = seed
        self.models = models

    def fit(self, portfolio, y=None):
        self.specs_ = size_storage(portfolio, self.omega, self.n_samples, self.seed, self.models)
        self.p_reest_ = {s.bus: s.p_reest for s in self.specs_}
        return self


STORAGE_HEADER = ["bus", "omega", "p_reest_kw", "n"]


def write_storage_csv(path, specs: Sequence[StorageSpec]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(STORAGE_HEADER)
        for s in specs:
            out.writerow([s.bus, f"{s.omega:g}", f"{s.p_reest:.6f}", s.n_samples])


def read_storage_csv(path, seed: int = 0) -> list[StorageSpec]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(STORAGE_HEADER) - set(rows[0] if rows else STORAGE_HEADER)
    if missing:
        raise ValueError(f"storage CSV lacks columns {sorted(missing)}")
    return [StorageSpec(int(r["bus"]), float(r["p_reest_kw"]), float(r["omega"]), int(r["n"]), seed)
            for r in rows]
