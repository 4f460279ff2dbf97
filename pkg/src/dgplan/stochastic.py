"""Stochastic output models for wind and PV units and seeded Monte Carlo sampling.

Wind speed is Weibull distributed and fed through a linear-ramp power
curve; irradiance is ``r_max * Beta(a, b)`` mapped linearly to output.
Micro-turbines are dispatchable and always sit at rated output.

Samples are drawn in fixed-size chunks, each from its own RNG stream keyed
by ``(seed, bus, chunk)``, so the draws do not depend on how work is split
and the first ``n`` samples of a ``2n`` run equal an ``n`` run.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .objectives import DgUnit

CHUNK = 1000

DEFAULT_WT = dict(v_in=4.0, v_r=16.0, v_out=28.0)
DEFAULT_PV = dict(eta=0.12, r_max=1000.0)
DEFAULT_DISTRIBUTIONS = {
    "WT": {"dist": "weibull", "params": {"k": 2.0, "c": 8.0}},
    "PV": {"dist": "beta", "params": {"a": 2.06, "b": 2.5}},
    "MT": {"dist": "constant", "params": {}},
}


@dataclass(frozen=True)
class WtCurve:
    v_in: float = DEFAULT_WT["v_in"]
    v_r: float = DEFAULT_WT["v_r"]
    v_out: float = DEFAULT_WT["v_out"]
    s_rated: float = 1.0

    def __post_init__(self):
        if not 0 < self.v_in < self.v_r < self.v_out:
            raise ValueError("need 0 < v_in < v_r < v_out")


@dataclass(frozen=True)
class PvModel:
    eta: float = DEFAULT_PV["eta"]
    r_max: float = DEFAULT_PV["r_max"]
    s_rated: float = 1.0
    area: float | None = None   # m^2; enables P = eta * area * r

    def __post_init__(self):
        if not 0 < self.eta <= 1 or self.r_max <= 0:
            raise ValueError("need 0 < eta <= 1 and r_max > 0")


def wt_power(v, curve: WtCurve):
    """Wind turbine output (kW) at wind speed ``v`` (m/s); accepts arrays."""
    v = np.asarray(v, dtype=float)
    ramp = curve.s_rated * (v - curve.v_in) / (curve.v_r - curve.v_in)
    out = np.where(v < curve.v_in, 0.0,
                   np.where(v < curve.v_r, ramp,
                            np.where(v < curve.v_out, curve.s_rated, 0.0)))
    return float(out) if out.ndim == 0 else out


def pv_power(r, model: PvModel):
    """PV output (kW) at irradiance ``r`` (W/m^2), capped at rating."""
    r = np.asarray(r, dtype=float)
    if model.area is None:
        out = model.s_rated * np.minimum(r / model.r_max, 1.0)
    else:
        out = np.minimum(model.eta * model.area * r / 1000.0, model.s_rated)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SiteModel:
    """Output model of one DG site: distribution of the driver plus conversion."""

    dist: str
    params: dict = field(default_factory=dict)
    wt: WtCurve = WtCurve()
    pv: PvModel = PvModel()

    def __post_init__(self):
        need = {"weibull": ("k", "c"), "beta": ("a", "b"), "constant": ()}
        if self.dist not in need:
            raise ValueError(f"unknown distribution {self.dist!r}")
        for key in need[self.dist]:
            if key not in self.params or not self.params[key] > 0:
                raise ValueError(f"{self.dist} parameter {key!r} must be positive")


def default_model(kind: str) -> SiteModel:
    spec = DEFAULT_DISTRIBUTIONS[kind]
    return SiteModel(spec["dist"], dict(spec["params"]))


def load_models(path_or_dict) -> dict:
    """Parse a distribution config.

    Keys are DG kinds (``"WT"``) or bus ids (``"61"``); values look like
    ``{"dist": "weibull", "params": {"k": 2, "c": 8}, "curve": {...}, "pv": {...}}``.
    """
    doc = path_or_dict
    if not isinstance(doc, dict):
        with open(doc) as fh:
            doc = json.load(fh)
    out = {}
    for key, row in doc.items():
        wt = WtCurve(**row.get("curve", {}))
        pv = PvModel(**row.get("pv", {}))
        out[key] = SiteModel(row["dist"], dict(row.get("params", {})), wt, pv)
    return out


def model_for(site: DgUnit, models: dict | None = None) -> SiteModel:
    models = models or {}
    for key in (str(site.bus), site.bus, site.kind):
        if key in models:
            return models[key]
    return default_model(site.kind)


@dataclass(frozen=True, eq=False)
class SampleSet:
    site: DgUnit
    samples: np.ndarray   # kW, length n
    seed: int

    @property
    def n(self) -> int:
        return len(self.samples)


def stream(seed: int, bus: int, index: int) -> np.random.Generator:
    """Independent generator for ``(seed, bus, index)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(int(bus), int(index))))


def _draw_chunk(site: DgUnit, model: SiteModel, rng, size: int) -> np.ndarray:
    rated = site.s_rated
    if site.kind == "MT" or model.dist == "constant":
        return np.full(size, rated)
    if model.dist == "weibull":
        v = model.params["c"] * rng.weibull(model.params["k"], size)
        curve = WtCurve(model.wt.v_in, model.wt.v_r, model.wt.v_out, rated)
        return wt_power(v, curve)
    r = model.pv.r_max * rng.beta(model.params["a"], model.params["b"], size)
    pv = PvModel(model.pv.eta, model.pv.r_max, rated, model.pv.area)
    return pv_power(r, pv)


def sample_site(site: DgUnit, n: int, seed: int, models: dict | None = None,
                start: int = 0) -> np.ndarray:
    """Output samples ``start .. start+n-1`` of the site's stream, kW."""
    if n < 1:
        raise ValueError("n must be >= 1")
    model = model_for(site, models)
    first, last = start // CHUNK, (start + n - 1) // CHUNK
    parts = [_draw_chunk(site, model, stream(seed, site.bus, c), CHUNK)
             for c in range(first, last + 1)]
    flat = np.concatenate(parts)
    off = start - first * CHUNK
    return flat[off:off + n]


def sample_outputs(sites: Sequence[DgUnit], n: int, seed: int,
                   models: dict | None = None) -> list[SampleSet]:
    """One :class:`SampleSet` of ``n`` output draws per site."""
    return [SampleSet(s, sample_site(s, n, seed, models), seed) for s in sites]
