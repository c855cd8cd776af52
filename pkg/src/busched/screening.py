"""Bus priority screening and state-vector construction."""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DAY_MINUTES, Entry, ProblemInstance

RUNNING = -1
SENTINEL = -1
SHORT_TERM_WINDOW = 300
CP_FEATURES = 5
LINE_FEATURES = 3
BUS_FEATURES = 4


@dataclass(frozen=True)
class BusStatus:
    bus_id: int
    used: bool
    location: int  # CP id, or RUNNING
    last_arrival_minute: int
    rest_minutes: int
    deadhead_needed: int


@dataclass(frozen=True)
class ScreeningResult:
    v_p: tuple[int, ...]
    v_q: tuple[int, ...]
    target_set: tuple[int, ...]  # SENTINEL for padding slots
    padding_count: int


def bus_status(instance: ProblemInstance, bus_id: int, used: bool, loc: int, free_at: int,
               now: int, dep_cp: int) -> BusStatus:
    if free_at > now:
        return BusStatus(bus_id, used, RUNNING, free_at, 0, 0)
    k = instance.deadhead(loc, dep_cp)
    return BusStatus(bus_id, used, loc, free_at, now - free_at, k)


def count_in_window(departures: Sequence[int], start: int, end: int) -> int:
    """Departures in the half-open window [start, end)."""
    return bisect_left(departures, end) - bisect_left(departures, start)


def cp_features(instance: ProblemInstance, statuses: Sequence[BusStatus], now: int) -> list[tuple]:
    """(o, n_l, n_s, n_a, n_o) for every CP, in control-point order."""
    deps = {tt.cp_id: tt.departures for tt in instance.timetables}
    avail = {cp: 0 for cp in instance.cp_ids}
    avail_used = dict(avail)
    for s in statuses:
        if s.location != RUNNING and s.rest_minutes >= instance.r_min:
            avail[s.location] += 1
            if s.used:
                avail_used[s.location] += 1
    out = []
    for cp in instance.cp_ids:
        d = deps.get(cp, ())
        n_l = count_in_window(d, now, DAY_MINUTES)
        n_s = count_in_window(d, now, now + SHORT_TERM_WINDOW)
        out.append((cp, n_l, n_s, avail[cp], avail_used[cp]))
    return out


def classify_buses(statuses: Sequence[BusStatus], entry: Entry, mode: str,
                   r_min: int) -> tuple[list[BusStatus], list[BusStatus]]:
    v_p, v_q = [], []
    for s in statuses:
        if s.location == RUNNING:
            continue
        if s.location == entry.cp_id:
            if s.rest_minutes >= r_min:
                v_p.append(s)
        elif mode == "offline" and s.deadhead_needed > 0 and s.rest_minutes > s.deadhead_needed + r_min:
            v_q.append(s)
    return v_p, v_q


def rest_order(buses):
    """Longest rest first, bus id breaks ties."""
    return sorted(buses, key=lambda s: (-s.rest_minutes, s.bus_id))


def build_target_set(v_p_raw: Sequence[BusStatus], v_q_raw: Sequence[BusStatus],
                     n_s: int) -> ScreeningResult:
    used_p = rest_order(s for s in v_p_raw if s.used)
    used_q = sorted((s for s in v_q_raw if s.used), key=lambda s: (s.deadhead_needed, s.bus_id))
    unused_p = sorted((s for s in v_p_raw if not s.used), key=lambda s: s.bus_id)
    unused_q = sorted((s for s in v_q_raw if not s.used), key=lambda s: s.bus_id)
    ordered = [s.bus_id for s in (*used_p, *used_q, *unused_p, *unused_q)][:n_s]
    pad = n_s - len(ordered)
    return ScreeningResult(
        v_p=tuple(s.bus_id for s in (*used_p, *unused_p)),
        v_q=tuple(s.bus_id for s in (*used_q, *unused_q)),
        target_set=tuple(ordered) + (SENTINEL,) * pad,
        padding_count=pad,
    )


def bus_block(statuses_by_id: dict, target_set: Sequence[int]) -> np.ndarray:
    out = np.full((len(target_set), BUS_FEATURES), -1.0)
    for i, b in enumerate(target_set):
        if b == SENTINEL:
            continue
        s = statuses_by_id[b]
        out[i] = (float(s.used), s.rest_minutes / DAY_MINUTES, s.location, s.deadhead_needed / DAY_MINUTES)
    return out.ravel()


def state_dim(n_cps: int, n_slots: int) -> int:
    return CP_FEATURES * n_cps + LINE_FEATURES + BUS_FEATURES * n_slots


def build_state(cp_block: Sequence[tuple], line_block: tuple, statuses_by_id: dict,
                target_set: Sequence[int]) -> np.ndarray:
    """Flatten CP features, the current line's features and the target-set bus features."""
    cps = np.asarray(cp_block, dtype=float).ravel()
    dep, term, h = line_block
    line = np.array([dep, term, h / DAY_MINUTES], dtype=float)
    return np.concatenate([cps, line, bus_block(statuses_by_id, target_set)])
