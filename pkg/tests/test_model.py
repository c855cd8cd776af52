import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from busched.model import (
    UNCOVERED,
    BusLine,
    ControlPoint,
    Entry,
    InstanceError,
    ProblemInstance,
    Schedule,
    Timetable,
    TravelTimeOverride,
    TripRecord,
    compute_objectives,
    effective_travel_time,
    merge_timetables,
    validate_schedule,
)

from builders import shuttle, two_routes


def test_merge_orders_by_minute():
    inst = shuttle([300, 360], [330])
    got = [(e.minute, e.cp_id) for e in merge_timetables(inst)]
    assert got == [(300, 1), (330, 2), (360, 1)]


def test_merge_empty():
    assert merge_timetables(shuttle()) == []


def test_merge_tie_puts_lower_cp_first():
    inst = shuttle([300], [300])
    assert [e.cp_id for e in merge_timetables(inst)] == [1, 2]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1439), max_size=15, unique=True),
       st.lists(st.integers(0, 1439), max_size=15, unique=True))
def test_merge_matches_stable_sort(a, b):
    inst = shuttle(sorted(a), sorted(b))
    # oracle: concatenate CP2 first, then a stable sort on (minute, cp)
    raw = [(m, 2, 2) for m in sorted(b)] + [(m, 1, 1) for m in sorted(a)]
    expect = sorted(raw, key=lambda x: (x[0], x[1]))
    assert [(e.minute, e.cp_id, e.line_id) for e in merge_timetables(inst)] == expect


def test_travel_time_overrides():
    inst = shuttle([850])
    ov = (TravelTimeOverride(None, 810, 1000, 15),)
    assert effective_travel_time(inst, 1, 850) == 40
    assert effective_travel_time(inst, 1, 850, ov) == 55
    assert effective_travel_time(inst, 1, 810, ov) == 55
    assert effective_travel_time(inst, 1, 1000, ov) == 40
    assert effective_travel_time(inst, 2, 850, (TravelTimeOverride(1, 0, 1440, 15),)) == 40


def test_instance_invariants():
    good = dict(
        control_points=[ControlPoint(1, 1), ControlPoint(2, 0)],
        lines=[BusLine(1, 1, 2, 40)],
        timetables=[Timetable(1, (300,))],
        deadhead_matrix=[[0, 5], [5, 0]],
        r_min=5,
        fleet_size=1,
    )
    ProblemInstance(**good)
    bad = [
        {"control_points": [ControlPoint(1, 1), ControlPoint(1, 0)]},
        {"lines": [BusLine(1, 1, 1, 40)]},
        {"lines": [BusLine(1, 1, 2, 0)]},
        {"lines": [BusLine(1, 1, 2, 40), BusLine(2, 1, 2, 40)]},
        {"timetables": [Timetable(1, (300, 300))]},
        {"timetables": [Timetable(2, (300,))]},
        {"timetables": [Timetable(1, (1440,))]},
        {"deadhead_matrix": [[0, 5]]},
        {"deadhead_matrix": [[1, 5], [5, 0]]},
        {"deadhead_matrix": [[0, -5], [5, 0]]},
        {"fleet_size": 2},
        {"r_min": -1},
        {"target_set_capacity": 0},
        {"overrides": [TravelTimeOverride(9, 0, 10, 5)]},
        {"overrides": [TravelTimeOverride(None, 10, 0, 5)]},
    ]
    for change in bad:
        with pytest.raises(InstanceError):
            ProblemInstance(**{**good, **change})


def test_unknown_line_lookup():
    with pytest.raises(InstanceError):
        shuttle().line(7)


def test_initial_locations_follow_cp_order():
    inst = two_routes(buses=(2, 0, 1, 3))
    assert inst.initial_locations() == [1, 1, 3, 4, 4, 4]


def _service(bus, inst, line_id, minute, extra=0):
    ln = inst.line(line_id)
    return TripRecord(bus, "service", ln.departure_cp, ln.terminal_cp, minute,
                      minute + ln.base_travel_time + extra, line_id)


def test_short_rest_is_constraint_2():
    inst = shuttle([460], [503])
    sched = Schedule([_service(0, inst, 1, 460), _service(0, inst, 2, 503)])
    v = validate_schedule(inst, sched)
    assert [x.constraint for x in v] == ["2"]


def test_rest_equal_to_r_min_is_fine():
    inst = shuttle([460], [505])
    sched = Schedule([_service(0, inst, 1, 460), _service(0, inst, 2, 505)])
    assert validate_schedule(inst, sched) == []


def _deadhead_case(depart, dh_start=505):
    inst = two_routes({1: [460], 3: [depart]})
    trips = [_service(0, inst, 1, 460),
             TripRecord(0, "deadhead", 2, 3, dh_start, dh_start + 10),
             _service(0, inst, 3, depart)]
    return inst, Schedule(trips)


def test_deadhead_gap_constraint_3():
    inst, sched = _deadhead_case(516)
    assert validate_schedule(inst, sched) == []
    # arrival 500, 10-minute deadhead, departure 514: 14 < 5 + 10
    inst, sched = _deadhead_case(514, dh_start=500)
    assert [x.constraint for x in validate_schedule(inst, sched)] == ["3"]


def test_overlap_is_constraint_1():
    inst = shuttle([460, 470])
    sched = Schedule([_service(0, inst, 1, 460), _service(0, inst, 1, 470)])
    kinds = {x.constraint for x in validate_schedule(inst, sched)}
    assert "1" in kinds


def test_structure_violations():
    inst = shuttle([460], [600], buses=(1, 1))
    wrong_cp = Schedule([_service(1, inst, 1, 460)])  # bus 1 starts at CP2
    assert [x.constraint for x in validate_schedule(inst, wrong_cp)] == ["structure"]
    wrong_time = Schedule([TripRecord(0, "service", 1, 2, 460, 470, 1)])
    assert [x.constraint for x in validate_schedule(inst, wrong_time)] == ["structure"]
    ghost = Schedule([], {Entry(460, 1, 1): 0})
    assert [x.constraint for x in validate_schedule(inst, ghost)] == ["4"]


def test_validate_respects_overrides():
    ov = (TravelTimeOverride(None, 400, 500, 15),)
    inst = shuttle([460], overrides=ov)
    late = Schedule([_service(0, inst, 1, 460, extra=15)])
    assert validate_schedule(inst, late) == []
    assert validate_schedule(inst, late, ()) != []


def test_objectives_empty_schedule():
    inst = shuttle(range(300, 800, 100), range(350, 850, 100))
    assert compute_objectives(inst, Schedule()).key() == (10, 0, 0)
    r = compute_objectives(inst, Schedule())
    assert (r.n_used, r.deadhead_total, r.n_uncovered) == (0, 0, 10)


def test_objectives_one_bus_one_deadhead():
    inst = shuttle(range(300, 1300, 100), travel=20)
    entries = merge_timetables(inst)
    trips = [_service(0, inst, 1, e.minute) for e in entries]
    trips.append(TripRecord(0, "deadhead", 2, 1, 330, 342))
    r = compute_objectives(inst, Schedule(trips, {e: 0 for e in entries}))
    assert (r.n_used, r.deadhead_total, r.n_uncovered) == (1, 12, 0)


def _recount(inst, sched):
    buses, dh = set(), 0
    for t in sched.trips:
        if t.kind == "service":
            buses.add(t.bus_id)
        else:
            dh += t.arrive_minute - t.depart_minute
    entries = [(m, tt.cp_id) for tt in inst.timetables for m in tt.departures]
    hit = {(e.minute, e.cp_id) for e, b in sched.covered.items() if b != UNCOVERED}
    return len(buses), dh, sum(1 for e in entries if e not in hit)


def test_objectives_match_recount_on_random_schedules():
    rng = random.Random(3)
    for _ in range(200):
        deps1 = sorted(rng.sample(range(300, 1200), rng.randint(0, 8)))
        deps2 = sorted(rng.sample(range(300, 1200), rng.randint(0, 8)))
        inst = shuttle(deps1, deps2, buses=(2, 2))
        trips, covered = [], {}
        for e in merge_timetables(inst):
            if rng.random() < 0.3:
                # uncovered: explicit marker or simply absent
                if rng.random() < 0.5:
                    covered[e] = UNCOVERED
                continue
            b = rng.randrange(4)
            trips.append(_service(b, inst, e.line_id, e.minute))
            covered[e] = b
            if rng.random() < 0.2:
                k = rng.randint(1, 30)
                trips.append(TripRecord(b, "deadhead", 1, 2, e.minute - k - 10, e.minute - 10))
        sched = Schedule(trips, covered)
        r = compute_objectives(inst, sched)
        assert (r.n_used, r.deadhead_total, r.n_uncovered) == _recount(inst, sched)
