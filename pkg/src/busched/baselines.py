"""Non-learning comparators: greedy dispatch, LNS improvement, exhaustive optimum."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import (
    Entry,
    ObjectiveReport,
    ProblemInstance,
    Schedule,
    TripRecord,
    UNCOVERED,
    compute_objectives,
    effective_travel_time,
    merge_timetables,
)
from .sim import DispatchSim, first_slot_policy, run_episode

BRUTE_FORCE_MAX_ENTRIES = 12
BRUTE_FORCE_MAX_FLEET = 4


def greedy_schedule(instance: ProblemInstance) -> Schedule:
    """Always dispatch the top-priority screened bus."""
    if instance.fleet_size == 0:
        return Schedule([], {e: UNCOVERED for e in merge_timetables(instance)})
    sim = DispatchSim(instance, "offline", apply_overrides=False)
    schedule, _, _ = run_episode(sim, first_slot_policy)
    return schedule


@dataclass(frozen=True)
class LnsConfig:
    iterations: int = 200
    destroy_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.destroy_fraction < 1:
            raise ValueError("destroy_fraction must lie in (0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


class _Chains:
    """Per-bus ordered service entries with the same feasibility rules as the simulator."""

    def __init__(self, instance: ProblemInstance, entries: list[Entry]):
        self.inst = instance
        self.entries = entries
        self.start_free = entries[0].minute - instance.r_min if entries else 0
        self.init_loc = instance.initial_locations()
        self.arrive = {e: e.minute + effective_travel_time(instance, e.line_id, e.minute, ())
                       for e in entries}
        self.term = {e: instance.line(e.line_id).terminal_cp for e in entries}

    def link(self, prev, entry):
        """(feasible, deadhead minutes) for serving ``entry`` right after ``prev``.

        ``prev`` is an Entry or a bus id (meaning: the bus at its start position).
        """
        if isinstance(prev, Entry):
            free, loc = self.arrive[prev], self.term[prev]
        else:
            free, loc = self.start_free, self.init_loc[prev]
        gap = entry.minute - free
        r = self.inst.r_min
        if loc == entry.cp_id:
            return gap >= r, 0
        k = self.inst.deadhead(loc, entry.cp_id)
        return gap > r + k, k

    def chain_cost(self, bus, chain) -> int:
        total, prev = 0, bus
        for e in chain:
            total += self.link(prev, e)[1]
            prev = e
        return total

    def key(self, chains, uncovered) -> tuple:
        used = sum(1 for c in chains if c)
        dh = sum(self.chain_cost(b, c) for b, c in enumerate(chains) if c)
        return (len(uncovered), used, dh)

    def best_insertion(self, chains, entry, rng):
        best = None
        for b in rng.permutation(len(chains)):
            chain = chains[b]
            # position: first index whose minute exceeds entry's
            pos = 0
            while pos < len(chain) and (chain[pos].minute, chain[pos].cp_id) < (entry.minute, entry.cp_id):
                pos += 1
            prev = chain[pos - 1] if pos > 0 else int(b)
            ok, k_in = self.link(prev, entry)
            if not ok:
                continue
            if pos < len(chain):
                ok, k_out = self.link(entry, chain[pos])
                if not ok:
                    continue
                k_old = self.link(prev, chain[pos])[1]
            else:
                k_out = k_old = 0
            score = (0 if chain else 1, k_in + k_out - k_old)
            if best is None or score < best[0]:
                best = (score, int(b), pos)
        return best

    def to_schedule(self, chains, uncovered) -> Schedule:
        trips, covered = [], {e: UNCOVERED for e in uncovered}
        r = self.inst.r_min
        for b, chain in enumerate(chains):
            free, loc = self.start_free, self.init_loc[b]
            for e in chain:
                if loc != e.cp_id:
                    k = self.inst.deadhead(loc, e.cp_id)
                    trips.append(TripRecord(b, "deadhead", loc, e.cp_id, free + r, free + r + k))
                line = self.inst.line(e.line_id)
                trips.append(TripRecord(b, "service", line.departure_cp, line.terminal_cp,
                                        e.minute, self.arrive[e], line.id))
                covered[e] = b
                free, loc = self.arrive[e], line.terminal_cp
        return Schedule(trips, covered)


def _chains_from_schedule(instance, schedule, entries):
    chains = [[] for _ in range(instance.fleet_size)]
    uncovered = []
    for e in entries:
        b = schedule.covered.get(e, UNCOVERED)
        if b == UNCOVERED:
            uncovered.append(e)
        else:
            chains[b].append(e)
    return chains, uncovered


def lns_improve(instance: ProblemInstance, initial: Schedule, cfg: LnsConfig = LnsConfig()) -> Schedule:
    """Destroy the chains of random buses, greedily reinsert, keep strict lexicographic improvements."""
    entries = merge_timetables(instance)
    if not entries or instance.fleet_size == 0:
        return initial
    ctx = _Chains(instance, entries)
    rng = np.random.default_rng(cfg.seed)
    chains, uncovered = _chains_from_schedule(instance, initial, entries)
    best_key = ctx.key(chains, uncovered)
    start_key = compute_objectives(instance, initial).key()
    for _ in range(cfg.iterations):
        used = [b for b, c in enumerate(chains) if c]
        if not used and not uncovered:
            break
        n_destroy = max(1, int(round(cfg.destroy_fraction * len(used)))) if used else 0
        victims = set(rng.choice(used, size=min(n_destroy, len(used)), replace=False).tolist()) if used else set()
        cand = [list(c) if b not in victims else [] for b, c in enumerate(chains)]
        pool = sorted(uncovered + [e for b in victims for e in chains[b]],
                      key=lambda e: (e.minute, e.cp_id, e.line_id))
        left = []
        for e in pool:
            ins = ctx.best_insertion(cand, e, rng)
            if ins is None:
                left.append(e)
            else:
                _, b, pos = ins
                cand[b].insert(pos, e)
        key = ctx.key(cand, left)
        if key < best_key:
            chains, uncovered, best_key = cand, left, key
    if best_key >= start_key:
        return initial
    return ctx.to_schedule(chains, uncovered)


class InstanceTooLarge(ValueError):
    pass


def brute_force_optimal(instance: ProblemInstance) -> ObjectiveReport:
    """Exact lexicographic minimum of (N_d, N_u, T_d) by memoised exhaustive search.

    Uses its own bus bookkeeping so it can serve as an oracle for the simulator.
    """
    entries = merge_timetables(instance)
    if len(entries) > BRUTE_FORCE_MAX_ENTRIES or instance.fleet_size > BRUTE_FORCE_MAX_FLEET:
        raise InstanceTooLarge(
            f"brute force limited to {BRUTE_FORCE_MAX_ENTRIES} entries and "
            f"{BRUTE_FORCE_MAX_FLEET} buses (got {len(entries)}, {instance.fleet_size})")
    if not entries:
        return ObjectiveReport(0, 0, 0)
    r = instance.r_min
    start = entries[0].minute - r
    # offline planning: base travel times, overrides ignored
    legs = []
    for e in entries:
        line = instance.line(e.line_id)
        legs.append((e.minute, e.cp_id, line.terminal_cp, e.minute + line.base_travel_time))
    cps = {cp: i for i, cp in enumerate(instance.cp_ids)}
    dh = instance.deadhead_matrix

    @lru_cache(maxsize=None)
    def best(i, buses):
        if i == len(legs):
            return (0, 0, 0)
        minute, cp, term, arr = legs[i]
        skip = best(i + 1, buses)
        out = (skip[0] + 1, skip[1], skip[2])
        for j, (used, loc, free) in enumerate(buses):
            if j > 0 and buses[j - 1] == buses[j]:
                continue
            gap = minute - free
            if loc == cp:
                if gap < r:
                    continue
                k = 0
            else:
                k = dh[cps[loc]][cps[cp]]
                if not gap > r + k:
                    continue
            nxt = tuple(sorted(buses[:j] + ((1, term, arr),) + buses[j + 1:]))
            sub = best(i + 1, nxt)
            cand = (sub[0], sub[1] + (0 if used else 1), sub[2] + k)
            if cand < out:
                out = cand
        return out

    init = tuple(sorted((0, loc, start) for loc in instance.initial_locations()))
    n_d, n_u, t_d = best(0, init)
    return ObjectiveReport(n_u, t_d, n_d)
