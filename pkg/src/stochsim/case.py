"""System case files: buses, branches, generators and loads.

A case is a single JSON document with sections ``system``, ``buses``,
``branches``, ``generators`` and ``loads``.  All electrical quantities are
per-unit on the system MVA base; angles are in radians.  See
``cases/ieee39.json`` for the full schema in use.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class CaseError(ValueError):
    """Raised when a case file violates the schema or an invariant."""


BUS_TYPES = ("slack", "PV", "PQ")


@dataclass(frozen=True)
class Bus:
    id: int
    type: str
    v_setpoint: float = 1.0
    angle: float = 0.0
    p_gen: float = 0.0  # scheduled active generation, p.u.


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b: float = 0.0  # total line charging susceptance, p.u.
    tap: float = 0.0  # transformer ratio on the from side; 0 means a plain line

    def matches(self, a: int, b: int) -> bool:
        return {self.from_bus, self.to_bus} == {a, b}


@dataclass(frozen=True)
class GeneratorParams:
    """Two-axis machine constants.

    ``H`` in seconds, ``D`` in p.u. torque per p.u. speed deviation,
    reactances and stator resistance in p.u., time constants in seconds,
    ``omega_r`` the rated angular frequency in rad/s.
    """

    bus: int
    H: float
    D: float
    xd: float
    xdp: float
    xq: float
    xqp: float
    Td0p: float
    Tq0p: float
    Rs: float = 0.0
    omega_r: float = 2.0 * math.pi * 60.0


@dataclass(frozen=True)
class Load:
    bus: int
    p: float
    q: float


@dataclass(frozen=True)
class SystemCase:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    generators: tuple[GeneratorParams, ...]
    loads: tuple[Load, ...]
    frequency_hz: float
    base_mva: float
    name: str = ""
    _bus_pos: dict[int, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "_bus_pos", {b.id: i for i, b in enumerate(self.buses)}
        )

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    def bus_index(self, bus_id: int) -> int:
        """Position of a bus id in the case ordering."""
        try:
            return self._bus_pos[bus_id]
        except KeyError:
            raise CaseError(f"unknown bus id {bus_id}") from None

    def has_branch(self, a: int, b: int) -> bool:
        return any(br.matches(a, b) for br in self.branches)

    def load_at(self, bus_id: int) -> Load | None:
        for ld in self.loads:
            if ld.bus == bus_id:
                return ld
        return None


def _require(record: dict, key: str, where: str):
    if key not in record:
        raise CaseError(f"{where}: missing field '{key}'")
    return record[key]


def parse_case(text: str, name: str = "") -> SystemCase:
    """Parse and validate a JSON case document.

    Raises :class:`CaseError` naming the offending field for schema
    violations, and for every invariant breach (duplicate bus ids, dangling
    branch endpoints, missing slack, non-positive impedances, ...).
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"not valid JSON (line {exc.lineno}): {exc.msg}") from exc

    if not isinstance(doc, dict):
        raise CaseError("top level must be a JSON object")
    for section in ("system", "buses", "branches", "generators", "loads"):
        if section not in doc:
            raise CaseError(f"missing section '{section}'")

    sysrec = doc["system"]
    freq = float(_require(sysrec, "frequency_hz", "system"))
    base = float(_require(sysrec, "base_mva", "system"))
    if freq <= 0 or base <= 0:
        raise CaseError("system: frequency_hz and base_mva must be positive")
    omega_r = 2.0 * math.pi * freq

    buses = []
    for i, rec in enumerate(doc["buses"]):
        where = f"buses[{i}]"
        btype = _require(rec, "type", where)
        if btype not in BUS_TYPES:
            raise CaseError(f"{where}: type must be one of {BUS_TYPES}, got {btype!r}")
        buses.append(
            Bus(
                id=int(_require(rec, "id", where)),
                type=btype,
                v_setpoint=float(rec.get("v_setpoint", 1.0)),
                angle=float(rec.get("angle", 0.0)),
                p_gen=float(rec.get("p_gen", 0.0)),
            )
        )

    branches = []
    for i, rec in enumerate(doc["branches"]):
        where = f"branches[{i}]"
        branches.append(
            Branch(
                from_bus=int(_require(rec, "from", where)),
                to_bus=int(_require(rec, "to", where)),
                r=float(_require(rec, "r", where)),
                x=float(_require(rec, "x", where)),
                b=float(rec.get("b", 0.0)),
                tap=float(rec.get("tap", 0.0)),
            )
        )

    gens = []
    for i, rec in enumerate(doc["generators"]):
        where = f"generators[{i}]"
        gens.append(
            GeneratorParams(
                bus=int(_require(rec, "bus", where)),
                H=float(_require(rec, "H", where)),
                D=float(rec.get("D", 0.0)),
                xd=float(_require(rec, "xd", where)),
                xdp=float(_require(rec, "xdp", where)),
                xq=float(_require(rec, "xq", where)),
                xqp=float(_require(rec, "xqp", where)),
                Td0p=float(_require(rec, "Td0p", where)),
                Tq0p=float(_require(rec, "Tq0p", where)),
                Rs=float(rec.get("Rs", 0.0)),
                omega_r=omega_r,
            )
        )

    loads = []
    for i, rec in enumerate(doc["loads"]):
        where = f"loads[{i}]"
        loads.append(
            Load(
                bus=int(_require(rec, "bus", where)),
                p=float(_require(rec, "P", where)),
                q=float(_require(rec, "Q", where)),
            )
        )

    case = SystemCase(
        buses=tuple(buses),
        branches=tuple(branches),
        generators=tuple(gens),
        loads=tuple(loads),
        frequency_hz=freq,
        base_mva=base,
        name=name,
    )
    _validate(case)
    return case


def _validate(case: SystemCase) -> None:
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        raise CaseError(f"duplicate bus id(s): {dup}")
    known = set(ids)

    slack = [b.id for b in case.buses if b.type == "slack"]
    if len(slack) != 1:
        raise CaseError(f"exactly one slack bus required, found {len(slack)}")

    for i, br in enumerate(case.branches):
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise CaseError(f"branches[{i}]: endpoint {end} is not a bus")
        if math.hypot(br.r, br.x) <= 0.0:
            raise CaseError(f"branches[{i}]: impedance magnitude must be positive")

    if not case.generators:
        raise CaseError("at least one generator required")
    gen_buses = [g.bus for g in case.generators]
    if len(set(gen_buses)) != len(gen_buses):
        raise CaseError("at most one generator per bus")
    for i, g in enumerate(case.generators):
        where = f"generators[{i}]"
        if g.bus not in known:
            raise CaseError(f"{where}: bus {g.bus} is not a bus")
        if g.H <= 0:
            raise CaseError(f"{where}: H must be positive")
        if g.Td0p <= 0 or g.Tq0p <= 0:
            raise CaseError(f"{where}: Td0p and Tq0p must be positive")
        if not (g.xd >= g.xdp > 0):
            raise CaseError(f"{where}: need xd >= xdp > 0")
        if not (g.xq >= g.xqp > 0):
            raise CaseError(f"{where}: need xq >= xqp > 0")

    for i, ld in enumerate(case.loads):
        if ld.bus not in known:
            raise CaseError(f"loads[{i}]: bus {ld.bus} is not a bus")
    load_buses = [ld.bus for ld in case.loads]
    if len(set(load_buses)) != len(load_buses):
        raise CaseError("at most one load record per bus")


def load_case(path) -> SystemCase:
    """Read a case file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_case(fh.read(), name=str(path))
