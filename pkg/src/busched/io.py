"""JSON instance / schedule / scenario files.

Instance file layout::

    {
      "name": "optional label",
      "control_points": [{"id": 1, "initial_bus_count": 3}, ...],
      "lines": [{"id": 1, "departure_cp": 1, "terminal_cp": 2, "base_travel_time": 40}, ...],
      "timetables": [{"cp_id": 1, "departures": [360, 380, ...]}, ...],
      "deadhead_matrix": [[0, 12, ...], ...],      # rows/cols follow control_points order
      "r_min": 5,
      "fleet_size": 12,
      "target_set_capacity": 8,
      "overrides": [{"line_id": null, "start": 810, "end": 1000, "extra": 15}]
    }
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .model import (
    BusLine,
    ControlPoint,
    Entry,
    InstanceError,
    ObjectiveReport,
    ProblemInstance,
    Schedule,
    Timetable,
    TravelTimeOverride,
    TripRecord,
    UNCOVERED,
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ControlPointModel(_Strict):
    id: int
    initial_bus_count: int = Field(0, ge=0)


class LineModel(_Strict):
    id: int
    departure_cp: int
    terminal_cp: int
    base_travel_time: int = Field(gt=0)


class TimetableModel(_Strict):
    cp_id: int
    departures: list[int]


class OverrideModel(_Strict):
    line_id: Optional[int] = None
    start: int = Field(ge=0)
    end: int = Field(ge=0)
    extra: int


class InstanceModel(_Strict):
    name: str = ""
    control_points: list[ControlPointModel]
    lines: list[LineModel]
    timetables: list[TimetableModel]
    deadhead_matrix: list[list[int]]
    r_min: int = Field(ge=0)
    fleet_size: int = Field(ge=0)
    target_set_capacity: int = Field(8, ge=1)
    overrides: list[OverrideModel] = []


class TripModel(_Strict):
    bus_id: int
    kind: str
    line_id: Optional[int] = None
    from_cp: int
    to_cp: int
    depart_minute: int
    arrive_minute: int


class CoverageModel(_Strict):
    minute: int
    line_id: int
    cp_id: int
    bus_id: Optional[int] = None


class ReportModel(_Strict):
    n_used: int
    deadhead_total: int
    n_uncovered: int


class ScheduleModel(_Strict):
    trips: list[TripModel]
    coverage: list[CoverageModel]
    report: Optional[ReportModel] = None


class FileFormatError(ValueError):
    pass


def _format_errors(path, err: ValidationError) -> str:
    lines = [f"{path}: invalid file"]
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        lines.append(f"  {loc}: {e['msg']}")
    return "\n".join(lines)


def _read_json(path):
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def write_atomic(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def overrides_from_data(data) -> tuple[TravelTimeOverride, ...]:
    return tuple(TravelTimeOverride(o.line_id, o.start, o.end, o.extra)
                 for o in (OverrideModel.model_validate(x) for x in data))


def instance_from_dict(data, source="<instance>") -> ProblemInstance:
    try:
        m = InstanceModel.model_validate(data)
    except ValidationError as err:
        raise FileFormatError(_format_errors(source, err)) from None
    try:
        return ProblemInstance(
            control_points=[ControlPoint(c.id, c.initial_bus_count) for c in m.control_points],
            lines=[BusLine(l.id, l.departure_cp, l.terminal_cp, l.base_travel_time) for l in m.lines],
            timetables=[Timetable(t.cp_id, tuple(t.departures)) for t in m.timetables],
            deadhead_matrix=m.deadhead_matrix,
            r_min=m.r_min,
            fleet_size=m.fleet_size,
            target_set_capacity=m.target_set_capacity,
            overrides=[TravelTimeOverride(o.line_id, o.start, o.end, o.extra) for o in m.overrides],
            name=m.name,
        )
    except InstanceError as err:
        raise FileFormatError(f"{source}: {err}") from None


def instance_to_dict(inst: ProblemInstance) -> dict:
    return {
        "name": inst.name,
        "control_points": [{"id": c.id, "initial_bus_count": c.initial_bus_count} for c in inst.control_points],
        "lines": [{"id": l.id, "departure_cp": l.departure_cp, "terminal_cp": l.terminal_cp,
                   "base_travel_time": l.base_travel_time} for l in inst.lines],
        "timetables": [{"cp_id": t.cp_id, "departures": list(t.departures)} for t in inst.timetables],
        "deadhead_matrix": [list(r) for r in inst.deadhead_matrix],
        "r_min": inst.r_min,
        "fleet_size": inst.fleet_size,
        "target_set_capacity": inst.target_set_capacity,
        "overrides": [{"line_id": o.line_id, "start": o.start, "end": o.end, "extra": o.extra}
                      for o in inst.overrides],
    }


def load_instance(path) -> ProblemInstance:
    return instance_from_dict(_read_json(path), source=str(path))


def save_instance(inst: ProblemInstance, path) -> None:
    write_atomic(path, json.dumps(instance_to_dict(inst), indent=1) + "\n")


def load_overrides(path) -> tuple[TravelTimeOverride, ...]:
    data = _read_json(path)
    if isinstance(data, dict):
        data = data.get("overrides", [])
    try:
        return overrides_from_data(data)
    except ValidationError as err:
        raise FileFormatError(_format_errors(path, err)) from None


def schedule_to_dict(schedule: Schedule, report: Optional[ObjectiveReport] = None) -> dict:
    trips = sorted(schedule.trips, key=lambda t: (t.bus_id, t.depart_minute, t.kind != "deadhead"))
    cov = sorted(schedule.covered.items(), key=lambda kv: (kv[0].minute, kv[0].cp_id, kv[0].line_id))
    out = {
        "trips": [{"bus_id": t.bus_id, "kind": t.kind, "line_id": t.line_id, "from_cp": t.from_cp,
                   "to_cp": t.to_cp, "depart_minute": t.depart_minute, "arrive_minute": t.arrive_minute}
                  for t in trips],
        "coverage": [{"minute": e.minute, "line_id": e.line_id, "cp_id": e.cp_id,
                      "bus_id": None if b == UNCOVERED else b} for e, b in cov],
    }
    if report is not None:
        out["report"] = {"n_used": report.n_used, "deadhead_total": report.deadhead_total,
                         "n_uncovered": report.n_uncovered}
    return out


def schedule_from_dict(data, source="<schedule>") -> Schedule:
    try:
        m = ScheduleModel.model_validate(data)
    except ValidationError as err:
        raise FileFormatError(_format_errors(source, err)) from None
    trips = [TripRecord(t.bus_id, t.kind, t.from_cp, t.to_cp, t.depart_minute, t.arrive_minute, t.line_id)
             for t in m.trips]
    covered = {Entry(c.minute, c.line_id, c.cp_id): (UNCOVERED if c.bus_id is None else c.bus_id)
               for c in m.coverage}
    return Schedule(trips, covered)


def save_schedule(schedule: Schedule, path, report: Optional[ObjectiveReport] = None) -> None:
    write_atomic(path, json.dumps(schedule_to_dict(schedule, report), indent=1) + "\n")


def load_schedule(path) -> Schedule:
    return schedule_from_dict(_read_json(path), source=str(path))
