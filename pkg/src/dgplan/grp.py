"""Grey relation projection ranking of Pareto solutions.

Each scheme's objective vector is min-max normalised (1 = best), compared
against a positive ideal row of ones and a negative ideal row of zeros
with Deng's grey relational coefficient, projected onto the weight vector,
and finally scored by its priority membership ``D`` in [0, 1].
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator

RHO = 0.5


@dataclass(frozen=True, eq=False)
class DecisionMatrix:
    values: np.ndarray            # (schemes, indications)
    senses: tuple[str, ...]       # "max" or "min" per column
    weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.size == 0 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("decision matrix needs at least one row and one column")
        if not np.all(np.isfinite(v)):
            raise ValueError("decision matrix must be finite")
        senses = tuple(self.senses)
        if len(senses) != v.shape[1] or any(s not in ("max", "min") for s in senses):
            raise ValueError("need one sense ('max' or 'min') per column")
        w = np.full(v.shape[1], 1.0) if self.weights is None else np.asarray(self.weights, float)
        if w.shape != (v.shape[1],) or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be non-negative, one per column")
        if w.sum() <= 0:
            raise ValueError("weight vector must not be all zero")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "weights", w / w.sum())

    @property
    def shape(self):
        return self.values.shape


def normalize(matrix: DecisionMatrix) -> np.ndarray:
    """Per-column min-max scaling with the sense applied (1 = best).

    A column with no spread carries no information and is set to 1.
    """
    v = matrix.values
    lo, hi = v.min(axis=0), v.max(axis=0)
    span = hi - lo
    out = np.ones_like(v)
    for k, sense in enumerate(matrix.senses):
        if span[k] > 0:
            out[:, k] = (v[:, k] - lo[k]) / span[k] if sense == "max" else (hi[k] - v[:, k]) / span[k]
    return out


def _deng(delta: np.ndarray, rho: float) -> np.ndarray:
    dmin, dmax = delta.min(), delta.max()
    if dmax == 0:
        return np.ones_like(delta)
    return (dmin + rho * dmax) / (delta + rho * dmax)


def grey_coefficients(matrix: DecisionMatrix, rho: float = RHO) -> tuple[np.ndarray, np.ndarray]:
    """Grey relational coefficients against the positive and negative ideal rows."""
    if not 0 < rho <= 1:
        raise ValueError("rho must be in (0, 1]")
    y = normalize(matrix)
    return _deng(np.abs(1.0 - y), rho), _deng(np.abs(y), rho)


def projection(gamma, weights) -> np.ndarray | float:
    """Projection of coefficient row(s) onto the weight direction."""
    w = np.asarray(weights, float)
    g = np.asarray(gamma, float)
    if g.shape[-1] != w.shape[0]:
        raise ValueError("coefficient and weight lengths differ")
    norm = np.sqrt(np.sum(w * w))
    if norm == 0:
        raise ValueError("weight vector must not be all zero")
    out = g @ (w * w) / norm
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class GrpRanking:
    v_plus: np.ndarray
    v_minus: np.ndarray
    membership: np.ndarray
    v_ideal: float

    @property
    def best_index(self) -> int:
        # argmax returns the first maximum, so ties go to the lowest row
        return int(np.argmax(self.membership))

    @property
    def order(self) -> np.ndarray:
        """Row indices from best to worst (stable on ties)."""
        return np.argsort(-self.membership, kind="stable")


def rank(matrix: DecisionMatrix, rho: float = RHO) -> GrpRanking:
    g_plus, g_minus = grey_coefficients(matrix, rho)
    w = matrix.weights
    v_plus = np.atleast_1d(projection(g_plus, w))
    v_minus = np.atleast_1d(projection(g_minus, w))
    v0 = projection(np.ones(len(w)), w)
    num = (v0 - v_minus) ** 2
    den = num + (v0 - v_plus) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.5)
    return GrpRanking(v_plus, v_minus, np.clip(d, 0.0, 1.0), float(v0))


class GreyRelationProjection(BaseEstimator):
    """Estimator form of :func:`rank`.

    ``fit(F)`` with ``F`` of shape (schemes, objectives) sets ``membership_``,
    ``best_index_`` and ``ranking_``.
    """

    def __init__(self, senses=("max", "max", "min"), weights=None, rho: float = RHO):
        self.senses = senses
        self.weights = weights
        self.rho = rho

    def fit(self, F, y=None):
        res = rank(DecisionMatrix(np.asarray(F, float), tuple(self.senses), self.weights), self.rho)
        self.ranking_ = res
        self.membership_ = res.membership
        self.best_index_ = res.best_index
        return self

    def predict(self, F=None):
        """Index of the compromise row of the fitted matrix."""
        return self.best_index_


def parse_weights(text: str | None, n: int) -> np.ndarray | None:
    if not text:
        return None
    w = [float(t) for t in text.split(",")]
    if len(w) != n:
        raise ValueError(f"expected {n} weights, got {len(w)}")
    return np.array(w)


def write_ranking(path, ranking: GrpRanking, labels: Sequence[str] | None = None) -> None:
    labels = labels or [str(i) for i in range(len(ranking.membership))]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["scheme", "v_plus_pu", "v_minus_pu", "membership_pu", "rank"])
        pos = np.empty(len(ranking.membership), int)
        pos[ranking.order] = np.arange(1, len(pos) + 1)
        for i, lab in enumerate(labels):
            out.writerow([lab, f"{ranking.v_plus[i]:.10g}", f"{ranking.v_minus[i]:.10g}",
                          f"{ranking.membership[i]:.10g}", int(pos[i])])
