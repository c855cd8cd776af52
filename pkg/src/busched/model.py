"""Static problem definition, schedules, feasibility checks and objectives.

All times are integer minutes from midnight of a single operating day.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

DAY_MINUTES = 1440
UNCOVERED = "uncovered"


class InstanceError(ValueError):
    """Raised for malformed or inconsistent problem instances."""


@dataclass(frozen=True)
class ControlPoint:
    id: int
    initial_bus_count: int = 0


@dataclass(frozen=True)
class BusLine:
    id: int
    departure_cp: int
    terminal_cp: int
    base_travel_time: int


@dataclass(frozen=True)
class Timetable:
    cp_id: int
    departures: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "departures", tuple(int(d) for d in self.departures))


@dataclass(frozen=True)
class TravelTimeOverride:
    """Extra minutes added to trips departing in ``[start, end)``.

    ``line_id=None`` applies the override to every line.
    """

    line_id: Optional[int]
    start: int
    end: int
    extra: int


@dataclass(frozen=True)
class Entry:
    """One departure of the combined timetable (a decision point)."""

    minute: int
    line_id: int
    cp_id: int


@dataclass(frozen=True)
class ProblemInstance:
    control_points: tuple[ControlPoint, ...]
    lines: tuple[BusLine, ...]
    timetables: tuple[Timetable, ...]
    deadhead_matrix: tuple[tuple[int, ...], ...]
    r_min: int
    fleet_size: int
    target_set_capacity: int = 8
    overrides: tuple[TravelTimeOverride, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "control_points", tuple(self.control_points))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "timetables", tuple(self.timetables))
        object.__setattr__(
            self, "deadhead_matrix", tuple(tuple(int(x) for x in row) for row in self.deadhead_matrix)
        )
        object.__setattr__(self, "overrides", tuple(self.overrides))
        check_instance(self)
        # lookup caches; excluded from equality since they are derived
        cp_index = {cp.id: i for i, cp in enumerate(self.control_points)}
        object.__setattr__(self, "_cp_index", cp_index)
        object.__setattr__(self, "_line_by_id", {ln.id: ln for ln in self.lines})
        object.__setattr__(self, "_line_by_cp", {ln.departure_cp: ln for ln in self.lines})

    def __eq__(self, other):
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        keys = ("control_points", "lines", "timetables", "deadhead_matrix", "r_min",
                "fleet_size", "target_set_capacity", "overrides", "name")
        return all(getattr(self, k) == getattr(other, k) for k in keys)

    def __hash__(self):
        return hash((self.control_points, self.lines, self.timetables, self.deadhead_matrix,
                     self.r_min, self.fleet_size, self.target_set_capacity, self.overrides))

    @property
    def cp_ids(self) -> list[int]:
        return [cp.id for cp in self.control_points]

    def cp_index(self, cp_id: int) -> int:
        return self._cp_index[cp_id]

    def line(self, line_id: int) -> BusLine:
        try:
            return self._line_by_id[line_id]
        except KeyError:
            raise InstanceError(f"unknown line id {line_id}") from None

    def line_at(self, cp_id: int) -> BusLine:
        return self._line_by_cp[cp_id]

    def deadhead(self, from_cp: int, to_cp: int) -> int:
        return self.deadhead_matrix[self._cp_index[from_cp]][self._cp_index[to_cp]]

    def initial_locations(self) -> list[int]:
        """CP id of every bus at operation start; bus ids follow CP order."""
        locs = []
        for cp in self.control_points:
            locs.extend([cp.id] * cp.initial_bus_count)
        return locs

    def n_departures(self) -> int:
        return sum(len(tt.departures) for tt in self.timetables)

    def replace(self, **changes) -> "ProblemInstance":
        kw = {k: getattr(self, k) for k in (
            "control_points", "lines", "timetables", "deadhead_matrix", "r_min",
            "fleet_size", "target_set_capacity", "overrides", "name")}
        kw.update(changes)
        return ProblemInstance(**kw)


def check_instance(inst: ProblemInstance) -> None:
    ids = [cp.id for cp in inst.control_points]
    if len(set(ids)) != len(ids):
        raise InstanceError("control point ids must be unique")
    id_set = set(ids)
    for cp in inst.control_points:
        if cp.initial_bus_count < 0:
            raise InstanceError(f"control point {cp.id}: initial_bus_count must be >= 0")
    line_ids = [ln.id for ln in inst.lines]
    if len(set(line_ids)) != len(line_ids):
        raise InstanceError("line ids must be unique")
    for ln in inst.lines:
        if ln.departure_cp not in id_set or ln.terminal_cp not in id_set:
            raise InstanceError(f"line {ln.id}: unknown control point")
        if ln.departure_cp == ln.terminal_cp:
            raise InstanceError(f"line {ln.id}: departure_cp equals terminal_cp")
        if ln.base_travel_time <= 0:
            raise InstanceError(f"line {ln.id}: base_travel_time must be > 0")
    dep_cps = [ln.departure_cp for ln in inst.lines]
    if len(set(dep_cps)) != len(dep_cps):
        raise InstanceError("each control point may be the departure CP of at most one line")
    seen = set()
    for tt in inst.timetables:
        if tt.cp_id not in dep_cps:
            raise InstanceError(f"timetable for CP {tt.cp_id}: not the departure CP of any line")
        if tt.cp_id in seen:
            raise InstanceError(f"duplicate timetable for CP {tt.cp_id}")
        seen.add(tt.cp_id)
        deps = tt.departures
        for a, b in zip(deps, deps[1:]):
            if b <= a:
                raise InstanceError(f"timetable for CP {tt.cp_id}: departures not strictly increasing")
        if deps and (deps[0] < 0 or deps[-1] >= DAY_MINUTES):
            raise InstanceError(f"timetable for CP {tt.cp_id}: departures outside [0, 1440)")
    n = len(ids)
    if len(inst.deadhead_matrix) != n or any(len(row) != n for row in inst.deadhead_matrix):
        raise InstanceError(f"deadhead_matrix must be {n}x{n}")
    for i, row in enumerate(inst.deadhead_matrix):
        if row[i] != 0:
            raise InstanceError(f"deadhead_matrix diagonal entry {i} must be 0")
        if any(x < 0 for x in row):
            raise InstanceError(f"deadhead_matrix row {i} has a negative entry")
    if inst.r_min < 0:
        raise InstanceError("r_min must be >= 0")
    if inst.fleet_size < 0:
        raise InstanceError("fleet_size must be >= 0")
    if inst.target_set_capacity < 1:
        raise InstanceError("target_set_capacity must be >= 1")
    if sum(cp.initial_bus_count for cp in inst.control_points) != inst.fleet_size:
        raise InstanceError("sum of initial_bus_count must equal fleet_size")
    for ov in inst.overrides:
        if ov.line_id is not None and ov.line_id not in line_ids:
            raise InstanceError(f"override references unknown line {ov.line_id}")
        if ov.end < ov.start:
            raise InstanceError("override window end precedes start")


def merge_timetables(instance: ProblemInstance) -> list[Entry]:
    """All departures of all CPs, ordered by (minute, cp_id, line_id)."""
    entries = []
    for tt in instance.timetables:
        line_id = instance.line_at(tt.cp_id).id
        entries.extend(Entry(m, line_id, tt.cp_id) for m in tt.departures)
    entries.sort(key=lambda e: (e.minute, e.cp_id, e.line_id))
    return entries


def effective_travel_time(instance: ProblemInstance, line_id: int, depart_minute: int,
                          overrides=None) -> int:
    line = instance.line(line_id)
    if overrides is None:
        overrides = instance.overrides
    extra = sum(
        ov.extra for ov in overrides
        if (ov.line_id is None or ov.line_id == line_id) and ov.start <= depart_minute < ov.end
    )
    return line.base_travel_time + extra


@dataclass(frozen=True)
class TripRecord:
    bus_id: int
    kind: str  # "service" | "deadhead"
    from_cp: int
    to_cp: int
    depart_minute: int
    arrive_minute: int
    line_id: Optional[int] = None

    @property
    def duration(self) -> int:
        return self.arrive_minute - self.depart_minute


@dataclass
class Schedule:
    trips: list[TripRecord] = field(default_factory=list)
    covered: dict[Entry, object] = field(default_factory=dict)

    def by_bus(self) -> dict[int, list[TripRecord]]:
        out = defaultdict(list)
        for t in self.trips:
            out[t.bus_id].append(t)
        for trips in out.values():
            trips.sort(key=lambda t: (t.depart_minute, t.arrive_minute, t.kind != "deadhead"))
        return dict(sorted(out.items()))


@dataclass(frozen=True)
class ObjectiveReport:
    n_used: int
    deadhead_total: int
    n_uncovered: int

    def key(self) -> tuple[int, int, int]:
        """Lexicographic comparison key (N_d, N_u, T_d)."""
        return (self.n_uncovered, self.n_used, self.deadhead_total)


@dataclass(frozen=True)
class Violation:
    constraint: str
    bus_id: Optional[int]
    message: str

    def __str__(self):
        who = f"bus {self.bus_id}: " if self.bus_id is not None else ""
        return f"[{self.constraint}] {who}{self.message}"


def validate_schedule(instance: ProblemInstance, schedule: Schedule,
                      overrides=None) -> list[Violation]:
    """Check constraints 1-3 plus structural consistency.

    Uncovered departures are not violations; they show up as ``n_uncovered``
    in :func:`compute_objectives`.
    """
    out: list[Violation] = []
    r_min = instance.r_min
    init = instance.initial_locations()
    known_entries = set(merge_timetables(instance))

    for bus, trips in schedule.by_bus().items():
        if not 0 <= bus < instance.fleet_size:
            out.append(Violation("structure", bus, "bus id outside fleet"))
            continue
        loc = init[bus]
        prev = None
        last_service = None
        dh_since = 0
        for t in trips:
            if t.arrive_minute <= t.depart_minute:
                out.append(Violation("structure", bus, f"trip at {t.depart_minute} has non-positive duration"))
            if t.kind == "service":
                line = instance._line_by_id.get(t.line_id)
                if line is None or line.departure_cp != t.from_cp or line.terminal_cp != t.to_cp:
                    out.append(Violation("structure", bus, f"service trip at {t.depart_minute} does not match line {t.line_id}"))
                elif t.duration != effective_travel_time(instance, t.line_id, t.depart_minute, overrides):
                    out.append(Violation("structure", bus, f"service trip at {t.depart_minute} has wrong travel time"))
            elif t.kind == "deadhead":
                if t.duration != instance.deadhead(t.from_cp, t.to_cp):
                    out.append(Violation("structure", bus, f"deadhead at {t.depart_minute} has wrong duration"))
            else:
                out.append(Violation("structure", bus, f"unknown trip kind {t.kind!r}"))
            if t.from_cp != loc:
                out.append(Violation("structure", bus, f"trip at {t.depart_minute} starts at CP {t.from_cp} but bus is at CP {loc}"))
            if prev is not None and t.depart_minute < prev.arrive_minute:
                out.append(Violation("1", bus, f"trip at {t.depart_minute} starts before previous trip ends at {prev.arrive_minute}"))
            if t.kind == "service":
                if last_service is not None:
                    gap = t.depart_minute - last_service.arrive_minute
                    if dh_since == 0 and gap < r_min:
                        out.append(Violation("2", bus, f"rest {gap} min before trip at {t.depart_minute} is below r_min={r_min}"))
                    elif dh_since > 0 and gap < r_min + dh_since:
                        out.append(Violation("3", bus, f"gap {gap} min before trip at {t.depart_minute} is below r_min + deadhead = {r_min + dh_since}"))
                last_service = t
                dh_since = 0
            elif t.kind == "deadhead":
                dh_since += t.duration
            loc = t.to_cp
            prev = t

    service_at = {(t.bus_id, t.depart_minute, t.from_cp) for t in schedule.trips if t.kind == "service"}
    for entry, bus in schedule.covered.items():
        if bus == UNCOVERED:
            continue
        if entry not in known_entries:
            out.append(Violation("structure", None, f"covered entry {entry} is not in the timetable"))
        elif (bus, entry.minute, entry.cp_id) not in service_at:
            out.append(Violation("4", bus, f"entry at {entry.minute} CP {entry.cp_id} marked covered without a service trip"))
    return out


def compute_objectives(instance: ProblemInstance, schedule: Schedule) -> ObjectiveReport:
    used = {t.bus_id for t in schedule.trips if t.kind == "service"}
    deadhead = sum(t.duration for t in schedule.trips if t.kind == "deadhead")
    covered = sum(1 for e in merge_timetables(instance) if schedule.covered.get(e, UNCOVERED) != UNCOVERED)
    return ObjectiveReport(len(used), deadhead, instance.n_departures() - covered)
