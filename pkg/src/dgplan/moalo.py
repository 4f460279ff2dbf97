"""Multi-objective ant lion optimizer with a bounded Pareto archive.

Ants walk randomly inside traps built around archive members. Each ant's
new position is the mean of a walk around a randomly chosen antlion and a
walk around an elite picked by roulette wheel (sparser hypercubes are more
likely). The archive keeps the non-dominated set and, when full, drops
members from the most crowded hypercubes first.

Dominance is feasibility-first: a feasible point beats an infeasible one,
two infeasible points compare by total violation, and two feasible points
compare by Pareto dominance under the given senses.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Candidate:
    x: np.ndarray
    values: tuple          # raw objective values
    feasible: bool = True
    violation: float = 0.0
    objectives: object = None   # whatever the evaluator returned


@dataclass(frozen=True)
class MoaloConfig:
    n_ants: int = 100
    max_iter: int = 500
    archive_capacity: int = 100
    seed: int = 0
    bounds: Sequence[tuple[float, float]] | None = None
    n_divisions: int = 10

    def __post_init__(self):
        if min(self.n_ants, self.max_iter, self.archive_capacity, self.n_divisions) < 1:
            raise ValueError("n_ants, max_iter, archive_capacity and n_divisions must be positive")


@dataclass
class Archive:
    members: list[Candidate]
    capacity: int
    senses: tuple = ()
    truncated: int = 0      # members dropped by crowding in the last update

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def X(self) -> np.ndarray:
        return np.array([m.x for m in self.members])

    @property
    def F(self) -> np.ndarray:
        return np.array([m.values for m in self.members], dtype=float)


def _signs(senses) -> np.ndarray:
    try:
        return np.array([{"min": 1.0, "max": -1.0}[s] for s in senses])
    except KeyError as exc:
        raise ValueError(f"sense must be 'min' or 'max', got {exc.args[0]!r}") from None


def dominates(a, b, senses) -> bool:
    """True if objective tuple ``a`` Pareto-dominates ``b`` under ``senses``."""
    if not len(a) == len(b) == len(senses):
        raise ValueError("objective tuples and senses must have equal length")
    s = _signs(senses)
    fa = s * np.asarray(a, float)
    fb = s * np.asarray(b, float)
    return bool(np.all(fa <= fb) and np.any(fa < fb))


def constrained_dominates(a: Candidate, b: Candidate, senses) -> bool:
    if a.feasible != b.feasible:
        return a.feasible
    if not a.feasible:
        return a.violation < b.violation
    return dominates(a.values, b.values, senses)


def dominance_matrix(F, senses, feasible=None, violation=None) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` constrained-dominates row ``j``."""
    G = np.asarray(F, float) * _signs(senses)
    n = len(G)
    feas = np.ones(n, bool) if feasible is None else np.asarray(feasible, bool)
    viol = np.zeros(n) if violation is None else np.asarray(violation, float)
    le = np.all(G[:, None, :] <= G[None, :, :], axis=2)
    lt = np.any(G[:, None, :] < G[None, :, :], axis=2)
    pareto = le & lt & feas[:, None] & feas[None, :]
    by_feas = feas[:, None] & ~feas[None, :]
    by_viol = ~feas[:, None] & ~feas[None, :] & (viol[:, None] < viol[None, :])
    return pareto | by_feas | by_viol


def nondominated_mask(F, senses, feasible=None, violation=None) -> np.ndarray:
    if len(F) == 0:
        return np.zeros(0, bool)
    return ~dominance_matrix(F, senses, feasible, violation).any(axis=0)


def hypercube_index(F, n_divisions: int = 10) -> np.ndarray:
    """Grid cell of every row after min-max normalisation of each objective."""
    F = np.asarray(F, float)
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    norm = np.divide(F - lo, span, out=np.zeros_like(F), where=span > 0)
    cells = np.minimum((norm * n_divisions).astype(int), n_divisions - 1)
    _, idx = np.unique(cells, axis=0, return_inverse=True)
    return idx.ravel()


def crowding_counts(F, n_divisions: int = 10) -> np.ndarray:
    """Number of archive members sharing each member's hypercube."""
    idx = hypercube_index(F, n_divisions)
    return np.bincount(idx)[idx]


def select_elite(archive: Archive, rng: np.random.Generator, n_divisions: int = 10) -> Candidate:
    """Roulette-wheel pick with weight inversely proportional to hypercube crowding."""
    if len(archive) == 0:
        raise ValueError("cannot select from an empty archive")
    if len(archive) == 1:
        return archive.members[0]
    w = 1.0 / crowding_counts(archive.F, n_divisions)
    k = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum(), side="right"))
    return archive.members[min(k, len(archive) - 1)]


def _scaled_distances(G) -> np.ndarray:
    """Pairwise distances between rows after min-max scaling each column."""
    lo = G.min(axis=0)
    span = G.max(axis=0) - lo
    N = (G - lo) / np.where(span > 0, span, 1.0)
    d = np.sqrt(((N[:, None, :] - N[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(d, np.inf)
    return d


def update_archive(archive: Archive, new: Sequence[Candidate]) -> Archive:
    """Merge ``new`` into the archive keeping only non-dominated, distinct members.

    On overflow, members are dropped one at a time. The victim is the member
    whose two nearest neighbours are closest together (the smallest hole is
    opened by removing it). The best member on each objective is exempt, so
    the front keeps its extent and the scaling stays fixed during truncation.
    """
    pool = list(archive.members) + list(new)
    if not pool:
        return Archive([], archive.capacity, archive.senses)
    F = np.array([c.values for c in pool], dtype=float)
    feas = np.array([c.feasible for c in pool])
    viol = np.array([c.violation for c in pool])
    keep = nondominated_mask(F, archive.senses, feas, viol)
    members, seen = [], set()
    for c, k in zip(pool, keep):
        if not k:
            continue
        key = (c.feasible, tuple(c.values), c.violation if not c.feasible else 0.0)
        if key in seen:
            continue
        seen.add(key)
        members.append(c)
    excess = len(members) - archive.capacity
    if excess <= 0:
        return Archive(members, archive.capacity, archive.senses)
    G = np.array([m.values for m in members], dtype=float) * _signs(archive.senses)
    d = _scaled_distances(G)
    alive = np.ones(len(members), bool)
    protected = np.zeros(len(members), bool)
    protected[np.argmin(G, axis=0)] = True
    for _ in range(excess):
        k = min(2, int(alive.sum()) - 1)
        gap = np.sort(d[np.ix_(alive, alive)], axis=1)[:, :k].sum(axis=1)
        rows = np.flatnonzero(alive)
        gap[protected[rows]] = np.inf
        victim = rows[int(np.argmin(gap))]
        alive[victim] = False
    members = [m for m, a in zip(members, alive) if a]
    return Archive(members, archive.capacity, archive.senses, truncated=excess)


def shrink_ratio(iteration: int, max_iter: int) -> float:
    """Trap shrink factor, growing in stages as iterations advance."""
    frac = iteration / max_iter
    w = 0
    for threshold, exponent in ((0.1, 2), (0.5, 3), (0.75, 4), (0.9, 5), (0.95, 6)):
        if frac > threshold:
            w = exponent
    return 1.0 + (10.0 ** w) * frac if w else 1.0


def trap_bounds(antlion, lower, upper, iteration, max_iter):
    """Search box shrunk by :func:`shrink_ratio` and centred on ``antlion``."""
    half = 0.5 * (np.asarray(upper, float) - np.asarray(lower, float)) / shrink_ratio(iteration, max_iter)
    return antlion - half, antlion + half


def random_walk(dim: int, max_iter: int, current_bounds, rng: np.random.Generator,
                steps=None) -> np.ndarray:
    """Cumulative +/-1 walk of ``max_iter`` steps per dimension, min-max mapped into bounds.

    Returns a ``(max_iter + 1, dim)`` matrix whose row ``t`` is the walk
    position after ``t`` steps. ``steps`` (0/1 array) overrides the coin flips.
    """
    lo, hi = (np.broadcast_to(np.asarray(b, float), (dim,)) for b in current_bounds)
    if steps is None:
        steps = rng.random((max_iter, dim)) > 0.5
    steps = np.asarray(steps).reshape(max_iter, dim)
    walk = np.vstack([np.zeros((1, dim)), np.cumsum(2.0 * steps - 1.0, axis=0)])
    a = walk.min(axis=0)
    b = walk.max(axis=0)
    span = np.where(b > a, b - a, 1.0)
    return (walk - a) * (hi - lo) / span + lo


def _walk_at(antlions, lower, upper, iteration, max_iter, rng):
    """Position at step ``iteration`` of one walk per row of ``antlions``."""
    out = np.empty_like(antlions)
    dim = antlions.shape[1]
    for k, al in enumerate(antlions):
        lo, hi = trap_bounds(al, lower, upper, iteration, max_iter)
        out[k] = random_walk(dim, max_iter, (lo, hi), rng)[iteration]
    return out


def _as_candidate(x, result) -> Candidate:
    if hasattr(result, "values") and hasattr(result, "feasible"):
        return Candidate(np.array(x, float), tuple(float(v) for v in result.values),
                         bool(result.feasible), float(getattr(result, "violation", 0.0)), result)
    return Candidate(np.array(x, float), tuple(float(v) for v in result), True, 0.0, result)


def _evaluate_all(evaluate, X, iteration, executor=None) -> list[Candidate]:
    try:
        results = list(executor.map(evaluate, X)) if executor else [evaluate(x) for x in X]
    except Exception as exc:
        raise RuntimeError(f"evaluator failed at iteration {iteration}: {exc}") from exc
    return [_as_candidate(x, r) for x, r in zip(X, results)]


def optimize(evaluate: Callable, config: MoaloConfig, senses=None,
             callback: Callable | None = None, executor=None) -> Archive:
    """Run the optimizer and return the final archive.

    ``evaluate`` maps a decision vector to either an object with ``values``,
    ``feasible`` and ``violation`` attributes or a plain tuple of objectives
    (all minimised unless ``senses`` says otherwise). ``callback(iteration,
    archive)`` runs after every archive update, including the initial one.
    ``executor`` (e.g. a thread pool) may evaluate ants concurrently; results
    are consumed in ant order so the run stays deterministic.
    """
    if config.bounds is None:
        raise ValueError("config.bounds is required")
    bounds = np.asarray(config.bounds, float)
    lower, upper = bounds[:, 0], bounds[:, 1]
    if not np.all(np.isfinite(bounds)) or np.any(lower >= upper):
        raise ValueError("bounds must be finite with lower < upper")
    dim = len(lower)
    rng = np.random.default_rng(config.seed)

    X = lower + rng.random((config.n_ants, dim)) * (upper - lower)
    batch = _evaluate_all(evaluate, X, 0, executor)
    if senses is None:
        first = batch[0].objectives
        senses = getattr(first, "senses", None) or (
            ("max", "max", "min") if hasattr(first, "c_p") else ("min",) * len(batch[0].values))
    archive = update_archive(Archive([], config.archive_capacity, tuple(senses)), batch)
    if callback:
        callback(0, archive)

    for it in range(1, config.max_iter + 1):
        pick = rng.integers(len(archive), size=config.n_ants)
        antlions = archive.X[pick]
        elites = np.array([select_elite(archive, rng, config.n_divisions).x
                           for _ in range(config.n_ants)])
        around_antlion = _walk_at(antlions, lower, upper, it, config.max_iter, rng)
        around_elite = _walk_at(elites, lower, upper, it, config.max_iter, rng)
        X = np.clip(0.5 * (around_antlion + around_elite), lower, upper)
        batch = _evaluate_all(evaluate, X, it, executor)
        archive = update_archive(archive, batch)
        if callback:
            callback(it, archive)
        if it % 50 == 0:
            logger.debug("iteration %d: archive size %d", it, len(archive))
    return archive


def hypervolume(points, ref) -> float:
    """Exact hypervolume dominated by ``points`` (all minimised) up to ``ref``.

    Recursive slicing on the last objective; fine for a few hundred points in
    two or three dimensions.
    """
    P = np.asarray(points, float)
    ref = np.asarray(ref, float)
    if P.size == 0:
        return 0.0
    P = P[np.all(P < ref, axis=1)]
    if len(P) == 0:
        return 0.0
    if P.shape[1] == 1:
        return float(ref[0] - P[:, 0].min())
    P = P[np.argsort(P[:, -1])]
    total = 0.0
    for k in range(len(P)):
        upper = P[k + 1, -1] if k + 1 < len(P) else ref[-1]
        depth = upper - P[k, -1]
        if depth > 0:
            total += depth * hypervolume(P[: k + 1, :-1], ref[:-1])
    return float(total)


def to_minimization(F, senses) -> np.ndarray:
    return np.asarray(F, float) * _signs(senses)


class MOALO(BaseEstimator):
    """Estimator facade over :func:`optimize`.

    ``fit(problem)`` takes a callable evaluator; ``bounds`` default to the
    evaluator's ``lower``/``upper`` attributes when present (as on
    :class:`dgplan.objectives.PlanningProblem`). Fitted attributes:
    ``archive_``, ``pareto_x_``, ``pareto_f_``, ``feasible_``, ``history_``.
    """

    def __init__(self, n_ants=100, max_iter=500, archive_capacity=100, seed=0,
                 n_divisions=10, bounds=None, senses=None, n_jobs=1):
        self.n_ants = n_ants
        self.max_iter = max_iter
        self.archive_capacity = archive_capacity
        self.seed = seed
        self.n_divisions = n_divisions
        self.bounds = bounds
        self.senses = senses
        self.n_jobs = n_jobs

    def _config(self, problem) -> MoaloConfig:
        bounds = self.bounds
        if bounds is None:
            bounds = list(zip(problem.lower, problem.upper))
        return MoaloConfig(self.n_ants, self.max_iter, self.archive_capacity, self.seed,
                           bounds, self.n_divisions)

    def fit(self, problem, y=None, callback=None):
        config = self._config(problem)
        history = []

        def record(it, archive):
            history.append({"iteration": it, "size": len(archive), "truncated": archive.truncated})
            if callback:
                callback(it, archive)

        if self.n_jobs and self.n_jobs > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(self.n_jobs) as pool:
                archive = optimize(problem, config, self.senses, record, pool)
        else:
            archive = optimize(problem, config, self.senses, record)
        self.archive_ = archive
        self.pareto_x_ = archive.X
        self.pareto_f_ = archive.F
        self.feasible_ = np.array([m.feasible for m in archive])
        self.history_ = history
        return self
