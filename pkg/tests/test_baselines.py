import itertools

import pytest

from busched.baselines import (
    InstanceTooLarge,
    LnsConfig,
    brute_force_optimal,
    greedy_schedule,
    lns_improve,
)
from busched.generate import GeneratorConfig, generate_instance
from busched.model import ControlPoint, Schedule, TripRecord, compute_objectives, merge_timetables, validate_schedule

from builders import shuttle, two_routes


def naive_optimum(inst):
    """Try every bus-or-nobody assignment; (N_d, N_u, T_d) minimum."""
    entries = sorted(((m, tt.cp_id) for tt in inst.timetables for m in tt.departures))
    travel = {l.departure_cp: (l.terminal_cp, l.base_travel_time) for l in inst.lines}
    pos = {cp.id: i for i, cp in enumerate(inst.control_points)}
    start = [cp.id for cp in inst.control_points for _ in range(cp.initial_bus_count)]
    t0 = entries[0][0] - inst.r_min
    best = None
    for assign in itertools.product(range(-1, inst.fleet_size), repeat=len(entries)):
        free = [t0] * inst.fleet_size
        loc = list(start)
        used, dh, ok = set(), 0, True
        for (m, cp), b in zip(entries, assign):
            if b < 0:
                continue
            gap = m - free[b]
            if loc[b] == cp:
                ok = gap >= inst.r_min
            else:
                k = inst.deadhead_matrix[pos[loc[b]]][pos[cp]]
                ok = gap > inst.r_min + k
                dh += k
            if not ok:
                break
            term, h = travel[cp]
            free[b], loc[b] = m + h, term
            used.add(b)
        if ok:
            key = (assign.count(-1), len(used), dh)
            best = key if best is None or key < best else best
    return best


def tiny(seed, n=3):
    return generate_instance(GeneratorConfig(n_lines=1, departures_per_cp=n, headway_bounds=(30, 60),
                                             travel_time_bounds=(10, 25), seed=seed))


def with_buses(inst, counts):
    cps = [ControlPoint(c.id, n) for c, n in zip(inst.control_points, counts)]
    return inst.replace(control_points=cps, fleet_size=sum(counts))


def test_brute_force_pair_examples():
    assert brute_force_optimal(shuttle([300], [346], buses=(1, 0))).key() == (0, 1, 0)
    assert brute_force_optimal(shuttle([300], [344], buses=(1, 1))).key() == (0, 2, 0)
    assert brute_force_optimal(shuttle([300], [344], buses=(1, 0))).key() == (1, 1, 0)


def test_brute_force_matches_naive_enumeration():
    cases = [tiny(s) for s in range(12)]
    cases += [two_routes({1: [300, 420], 3: [350], 4: [400]}, buses=(1, 0, 1, 0), cross=c)
              for c in (5, 20, 40)]
    cases += [shuttle([300, 390], [345], buses=(b, 1)) for b in (0, 1, 2)]
    # one bus short of what greedy needs, so some departures stay uncovered
    cases += [with_buses(tiny(s), (1, 0)) for s in range(6)]
    for inst in cases:
        assert brute_force_optimal(inst).key() == naive_optimum(inst), inst


def test_brute_force_refuses_large():
    with pytest.raises(InstanceTooLarge):
        brute_force_optimal(shuttle(range(300, 1300, 60), range(330, 1330, 60)))
    with pytest.raises(InstanceTooLarge):
        brute_force_optimal(shuttle([300], buses=(5, 0)))


def test_greedy_chains_one_bus():
    inst = shuttle([300, 400, 500], [350, 450], buses=(1, 1))
    report = compute_objectives(inst, greedy_schedule(inst))
    assert report.key() == (0, 1, 0)
    assert brute_force_optimal(inst).key() == (0, 1, 0)


def test_greedy_zero_fleet():
    inst = shuttle([300, 400], [350], buses=(0, 0))
    assert compute_objectives(inst, greedy_schedule(inst)).n_uncovered == 3


def test_greedy_and_lns_feasible():
    for seed in range(10):
        inst = generate_instance(GeneratorConfig(departures_per_cp=8, seed=seed, spare_buses=2))
        g = greedy_schedule(inst)
        assert validate_schedule(inst, g, ()) == []
        l = lns_improve(inst, g, LnsConfig(iterations=50, seed=seed))
        assert validate_schedule(inst, l, ()) == []
        assert compute_objectives(inst, l).key() <= compute_objectives(inst, g).key()


def test_lns_keeps_optimal_schedule():
    inst = shuttle([300, 400, 500], [350, 450], buses=(1, 1))
    g = greedy_schedule(inst)
    assert lns_improve(inst, g) is g


def test_lns_improves_bad_start():
    inst = shuttle([300, 400, 500], [350, 450], buses=(3, 2))
    # every departure on a fresh bus
    trips, covered = [], {}
    nxt = {1: [0, 1, 2], 2: [3, 4]}
    for e in merge_timetables(inst):
        b = nxt[e.cp_id].pop(0)
        ln = inst.line(e.line_id)
        trips.append(TripRecord(b, "service", ln.departure_cp, ln.terminal_cp, e.minute,
                                e.minute + ln.base_travel_time, ln.id))
        covered[e] = b
    bad = Schedule(trips, covered)
    assert compute_objectives(inst, bad).n_used == 5
    better = lns_improve(inst, bad, LnsConfig(iterations=100, seed=1))
    assert compute_objectives(inst, better).n_used < 5
    assert validate_schedule(inst, better) == []


def test_lns_is_seeded():
    inst = generate_instance(GeneratorConfig(departures_per_cp=8, seed=3, spare_buses=2))
    g = greedy_schedule(inst)
    a = lns_improve(inst, g, LnsConfig(iterations=40, seed=9))
    b = lns_improve(inst, g, LnsConfig(iterations=40, seed=9))
    assert a.trips == b.trips


def test_lns_config_checks():
    with pytest.raises(ValueError):
        LnsConfig(destroy_fraction=1.0)
    with pytest.raises(ValueError):
        LnsConfig(iterations=0)
