"""Radial distribution network data model and case-file I/O.

A case file is line oriented::

    # comment
    base_kv=12.66 base_mva=10

    [bus]
    # id kind p_kw q_kvar umin_pu umax_pu
    1 swing 0 0 1.0 1.0
    2 load 100 60 0.95 1.05

    [branch]
    # id from to r_ohm x_ohm s_rated_kva
    1 1 2 0.05 0.02 5000

``umin_pu``/``umax_pu`` and ``s_rated_kva`` may be omitted, in which case
0.95/1.05 pu and an unconstrained rating are used. The same fields are
accepted as JSON (``{"base_kv":..., "base_mva":..., "bus":[...], "branch":[...]}``).
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

DEFAULT_UMIN = 0.95
DEFAULT_UMAX = 1.05
UNCONSTRAINED_KVA = 99999.0

BUS_FIELDS = ("id", "kind", "p_kw", "q_kvar", "umin_pu", "umax_pu")
BRANCH_FIELDS = ("id", "from", "to", "r_ohm", "x_ohm", "s_rated_kva")


class CaseFormatError(ValueError):
    """Raised when a case file cannot be parsed."""


class CaseValidationError(ValueError):
    """Raised when a parsed case violates the radial-network invariants."""


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str
    p_load: float = 0.0
    q_load: float = 0.0
    u_min: float = DEFAULT_UMIN
    u_max: float = DEFAULT_UMAX


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    r: float
    x: float
    s_rated: float = UNCONSTRAINED_KVA


@dataclass(frozen=True)
class NetworkCase:
    """Immutable radial feeder. Impedances in ohms, powers in kW/kVar."""

    base_kv: float
    base_mva: float
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        validate_case(self)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def z_base(self) -> float:
        """Impedance base in ohms."""
        return self.base_kv**2 / self.base_mva

    @property
    def s_base_kva(self) -> float:
        return self.base_mva * 1000.0

    @cached_property
    def index(self) -> dict[int, int]:
        """External bus id -> contiguous 0-based position."""
        return {b.id: i for i, b in enumerate(self.buses)}

    @cached_property
    def swing(self) -> Bus:
        return next(b for b in self.buses if b.kind == "swing")

    @cached_property
    def bus_ids(self) -> np.ndarray:
        return np.array([b.id for b in self.buses])

    @cached_property
    def p_load(self) -> np.ndarray:
        return np.array([b.p_load for b in self.buses], dtype=float)

    @cached_property
    def q_load(self) -> np.ndarray:
        return np.array([b.q_load for b in self.buses], dtype=float)

    def bus(self, bus_id: int) -> Bus:
        try:
            return self.buses[self.index[bus_id]]
        except KeyError:
            raise KeyError(f"unknown bus id {bus_id}") from None

    def branch(self, branch_id: int) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise KeyError(f"unknown branch id {branch_id}")

    @cached_property
    def ordered(self) -> tuple[Branch, ...]:
        return tuple(downstream_order(self))

    @cached_property
    def depth(self) -> dict[int, int]:
        """Hop distance of every bus from the swing bus."""
        d = {self.swing.id: 0}
        for br in self.ordered:
            d[br.to_bus] = d[br.from_bus] + 1
        return d

    @cached_property
    def children(self) -> dict[int, list[int]]:
        ch: dict[int, list[int]] = {b.id: [] for b in self.buses}
        for br in self.ordered:
            ch[br.from_bus].append(br.to_bus)
        return ch

    def downstream_load(self, bus_id: int) -> float:
        """Active load (kW) of ``bus_id`` and every bus fed through it."""
        total, stack = 0.0, [bus_id]
        while stack:
            b = stack.pop()
            total += self.bus(b).p_load
            stack.extend(self.children[b])
        return total


def validate_case(case: NetworkCase) -> None:
    if case.base_kv <= 0 or case.base_mva <= 0:
        raise CaseValidationError("base_kv and base_mva must be positive")
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseValidationError("duplicate bus id")
    swings = [b for b in case.buses if b.kind == "swing"]
    if len(swings) != 1:
        raise CaseValidationError(f"expected exactly one swing bus, found {len(swings)}")
    for b in case.buses:
        if b.kind not in ("swing", "load"):
            raise CaseValidationError(f"bus {b.id}: unknown kind {b.kind!r}")
        if not 0 < b.u_min <= b.u_max:
            raise CaseValidationError(f"bus {b.id}: need 0 < u_min <= u_max")
        if b.kind == "load" and not b.u_min < b.u_max:
            raise CaseValidationError(f"bus {b.id}: need u_min < u_max")
        if b.p_load < 0 or b.q_load < 0:
            raise CaseValidationError(f"bus {b.id}: negative load")
    known = set(ids)
    br_ids = [br.id for br in case.branches]
    if len(set(br_ids)) != len(br_ids):
        raise CaseValidationError("duplicate branch id")
    for br in case.branches:
        if br.from_bus == br.to_bus:
            raise CaseValidationError(f"branch {br.id}: self loop")
        if br.from_bus not in known or br.to_bus not in known:
            raise CaseValidationError(f"branch {br.id}: unknown bus")
        if br.r < 0 or br.x < 0 or br.s_rated <= 0:
            raise CaseValidationError(f"branch {br.id}: need r >= 0, x >= 0, s_rated > 0")
    if len(case.branches) != len(case.buses) - 1:
        raise CaseValidationError(
            f"not radial: {len(case.branches)} branches for {len(case.buses)} buses")
    if len(_bfs(case)) != len(case.branches):
        raise CaseValidationError("not radial: network is disconnected or has a cycle")


def _bfs(case: NetworkCase) -> list[Branch]:
    adj: dict[int, list[Branch]] = {b.id: [] for b in case.buses}
    for br in case.branches:
        adj[br.from_bus].append(br)
        adj[br.to_bus].append(br)
    root = next(b.id for b in case.buses if b.kind == "swing")
    seen, out, queue = {root}, [], deque([root])
    while queue:
        u = queue.popleft()
        for br in sorted(adj[u], key=lambda e: e.id):
            v = br.to_bus if br.from_bus == u else br.from_bus
            if v in seen:
                continue
            seen.add(v)
            out.append(br if br.from_bus == u else replace(br, from_bus=u, to_bus=v))
            queue.append(v)
    return out


def downstream_order(case: NetworkCase) -> list[Branch]:
    """Branches in root-to-leaf (BFS) order, each oriented parent -> child.

    Branches listed child -> parent in the source are returned flipped.
    """
    return _bfs(case)


# ---------------------------------------------------------------- parsing

def _parse_float(tok: str, where: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise CaseFormatError(f"{where}: expected a number, got {tok!r}") from None


def _parse_int(tok: str, where: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise CaseFormatError(f"{where}: expected an integer, got {tok!r}") from None


def _bus_from_fields(vals, where) -> Bus:
    if len(vals) not in (4, 6):
        raise CaseFormatError(f"{where}: bus needs 4 or 6 fields, got {len(vals)}")
    kind = str(vals[1]).lower()
    umin, umax = (DEFAULT_UMIN, DEFAULT_UMAX) if len(vals) == 4 else (
        _parse_float(vals[4], where), _parse_float(vals[5], where))
    if kind == "swing" and len(vals) == 4:
        umin = umax = 1.0
    return Bus(_parse_int(vals[0], where), kind, _parse_float(vals[2], where),
               _parse_float(vals[3], where), umin, umax)


def _branch_from_fields(vals, where) -> Branch:
    if len(vals) not in (5, 6):
        raise CaseFormatError(f"{where}: branch needs 5 or 6 fields, got {len(vals)}")
    rating = _parse_float(vals[5], where) if len(vals) == 6 else UNCONSTRAINED_KVA
    return Branch(_parse_int(vals[0], where), _parse_int(vals[1], where),
                  _parse_int(vals[2], where), _parse_float(vals[3], where),
                  _parse_float(vals[4], where), rating)


def _parse_text(text: str, name: str) -> NetworkCase:
    header: dict[str, float] = {}
    buses, branches, section = [], [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if line.startswith("["):
            section = line.strip("[]").strip().lower()
            if section not in ("bus", "branch"):
                raise CaseFormatError(f"{where}: unknown section [{section}]")
            continue
        if "=" in line:
            for tok in line.split():
                key, _, val = tok.partition("=")
                if key not in ("base_kv", "base_mva"):
                    raise CaseFormatError(f"{where}: unknown header key {key!r}")
                header[key] = _parse_float(val, where)
            continue
        if section == "bus":
            buses.append(_bus_from_fields(line.split(), where))
        elif section == "branch":
            branches.append(_branch_from_fields(line.split(), where))
        else:
            raise CaseFormatError(f"{where}: data outside a section")
    if set(header) != {"base_kv", "base_mva"}:
        raise CaseFormatError("missing header line 'base_kv=<f> base_mva=<f>'")
    return NetworkCase(header["base_kv"], header["base_mva"], buses, branches, name=name)


def _parse_json(text: str, name: str) -> NetworkCase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"invalid JSON: {exc}") from None
    try:
        buses = [_bus_from_fields([row[k] for k in BUS_FIELDS if k in row], f"bus {i}")
                 for i, row in enumerate(doc["bus"])]
        branches = [_branch_from_fields([row[k] for k in BRANCH_FIELDS if k in row],
                                        f"branch {i}")
                    for i, row in enumerate(doc.get("branch", []))]
        return NetworkCase(float(doc["base_kv"]), float(doc["base_mva"]), buses,
                           branches, name=name)
    except (KeyError, TypeError) as exc:
        raise CaseFormatError(f"malformed JSON case: {exc}") from None


def load_case(source: str, name: str = "") -> NetworkCase:
    """Parse case-file content (text or JSON) into a validated case."""
    if source.lstrip().startswith("{"):
        return _parse_json(source, name)
    return _parse_text(source, name)


def read_case(path) -> NetworkCase:
    path = Path(path)
    return load_case(path.read_text(), name=path.stem)


def bundled_case(name: str = "pge69") -> NetworkCase:
    """A case shipped with the package (``pge69``: PG&E 69-bus feeder)."""
    text = resources.files("dgplan.data").joinpath(f"{name}.case").read_text()
    return load_case(text, name=name)


def dump_case(case: NetworkCase, fmt: str = "text") -> str:
    """Serialize ``case``; ``load_case(dump_case(c)) == c``."""
    if fmt == "json":
        doc = {
            "base_kv": case.base_kv, "base_mva": case.base_mva,
            "bus": [dict(zip(BUS_FIELDS, (b.id, b.kind, b.p_load, b.q_load, b.u_min, b.u_max)))
                    for b in case.buses],
            "branch": [dict(zip(BRANCH_FIELDS, (br.id, br.from_bus, br.to_bus, br.r, br.x,
                                                br.s_rated)))
                       for br in case.branches],
        }
        return json.dumps(doc, indent=1)
    lines = [f"base_kv={case.base_kv!r} base_mva={case.base_mva!r}", "", "[bus]",
             "# " + " ".join(BUS_FIELDS)]
    lines += [f"{b.id} {b.kind} {b.p_load!r} {b.q_load!r} {b.u_min!r} {b.u_max!r}"
              for b in case.buses]
    lines += ["", "[branch]", "# " + " ".join(BRANCH_FIELDS)]
    lines += [f"{br.id} {br.from_bus} {br.to_bus} {br.r!r} {br.x!r} {br.s_rated!r}"
              for br in case.branches]
    return "\n".join(lines) + "\n"


def case_summary(case: NetworkCase) -> dict:
    return {"name": case.name, "buses": case.n_bus, "branches": len(case.branches),
            "p_load_kw": float(case.p_load.sum()), "q_load_kvar": float(case.q_load.sum()),
            "base_kv": case.base_kv, "base_mva": case.base_mva}


__all__ = ["Bus", "Branch", "NetworkCase", "CaseFormatError", "CaseValidationError",
           "load_case", "read_case", "bundled_case", "dump_case", "downstream_order",
           "validate_case", "case_summary"]
