import xml.etree.ElementTree as ET

import pytest

from busched.baselines import greedy_schedule
from busched.gantt import render_gantt
from busched.model import Schedule, TripRecord

from builders import two_routes

NS = "{http://www.w3.org/2000/svg}"


def _trip_rects(svg):
    root = ET.fromstring(svg.split("\n", 1)[1])
    return root, [r for r in root.iter(NS + "rect") if "trip" in r.get("class", "").split()]


def test_empty_schedule_has_axes_and_legend():
    inst = two_routes({1: [300]})
    root, rects = _trip_rects(render_gantt(Schedule(), inst))
    assert rects == []
    classes = {g.get("class") for g in root.iter(NS + "g")}
    assert {"axis", "legend"} <= classes
    assert len([r for r in root.iter(NS + "rect") if r.get("class") == "swatch"]) == 5


def test_one_rect_per_trip(tmp_path):
    inst = two_routes({1: [300, 420], 2: [360], 3: [310, 500], 4: [380]}, buses=(1, 1, 1, 0), cross=12)
    sched = greedy_schedule(inst)
    sched.trips.append(TripRecord(2, "deadhead", 3, 1, 345, 357))
    svg = render_gantt(sched, inst, tmp_path / "g.svg", title="demo")
    _, rects = _trip_rects(svg)
    assert len(rects) == len(sched.trips)
    assert sum("deadhead" in r.get("class") for r in rects) == 1
    assert (tmp_path / "g.svg").read_text() == svg


def test_unknown_references_rejected():
    inst = two_routes({1: [300]})
    with pytest.raises(ValueError):
        render_gantt(Schedule([TripRecord(9, "service", 1, 2, 300, 340, 1)]), inst)
    with pytest.raises(ValueError):
        render_gantt(Schedule([TripRecord(0, "service", 1, 2, 300, 340, 7)]), inst)
