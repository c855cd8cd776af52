"""Decision-point simulator: one decision per combined-timetable departure."""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional

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
from .reward import RewardWeights, StepContext, demand_degree, final_reward, step_reward
from .screening import (
    SENTINEL,
    ScreeningResult,
    bus_status,
    build_state,
    build_target_set,
    classify_buses,
    cp_features,
    rest_order,
    state_dim,
)

MODES = ("offline", "online")
REWARD_MODES = ("combined", "final_only")


class ContractError(RuntimeError):
    """A caller broke an operation's precondition (e.g. chose a masked slot)."""


@dataclass
class Decision:
    entry: Entry
    statuses: list
    v_p: list
    v_q: list
    screening: Optional[ScreeningResult]
    target: tuple
    mask: np.ndarray
    cp_block: list
    vector: np.ndarray


@dataclass
class StepOutcome:
    state: Optional[np.ndarray]
    reward: float
    done: bool
    mask: Optional[np.ndarray]
    info: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)  # -1 for uncovered (no action taken)
    masks: list = field(default_factory=list)
    probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    returns: Optional[np.ndarray] = None
    advantages: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.rewards)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


class DispatchSim:
    """Mutable simulation state plus the MDP transition logic.

    Buses are described by three arrays: the CP they are at (or heading to),
    the minute they finish their current trip, and whether they have served
    a trip yet. A bus whose ``free_at`` lies after the decision minute is
    running.
    """

    def __init__(self, instance: ProblemInstance, mode: str = "offline", *,
                 weights: RewardWeights = RewardWeights(), reward_mode: str = "combined",
                 screening: bool = True, apply_overrides: Optional[bool] = None,
                 overrides=None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if reward_mode not in REWARD_MODES:
            raise ValueError(f"reward_mode must be one of {REWARD_MODES}")
        self.instance = instance
        self.mode = mode
        self.weights = weights
        self.reward_mode = reward_mode
        self.screening = screening
        if overrides is None:
            if apply_overrides is None:
                apply_overrides = mode == "online"
            overrides = instance.overrides if apply_overrides else ()
        self.overrides = tuple(overrides)
        self.entries = merge_timetables(instance)
        self.n_slots = instance.target_set_capacity if screening else instance.fleet_size
        self.dim = state_dim(len(instance.control_points), self.n_slots)
        self.seed = None
        self.idx = 0
        self._dec: Optional[Decision] = None

    # -- lifecycle -----------------------------------------------------
    def reset(self, seed: Optional[int] = None):
        if not self.entries:
            raise ValueError("instance has an empty combined timetable")
        inst = self.instance
        self.seed = seed
        self.idx = 0
        self.start_minute = self.entries[0].minute - inst.r_min
        self.bus_loc = list(inst.initial_locations())
        self.bus_free = [self.start_minute] * inst.fleet_size
        self.bus_used = [False] * inst.fleet_size
        self.trips: list[TripRecord] = []
        self.covered: dict = {}
        self.n_uncovered = 0
        self.log: list[dict] = []
        self._prepare()
        return self._dec.vector, self._dec.mask

    def clone(self) -> "DispatchSim":
        other = copy.copy(self)
        other.bus_loc = list(self.bus_loc)
        other.bus_free = list(self.bus_free)
        other.bus_used = list(self.bus_used)
        other.trips = list(self.trips)
        other.covered = dict(self.covered)
        other.log = list(self.log)
        return other

    @property
    def done(self) -> bool:
        return self.idx >= len(self.entries)

    @property
    def clock(self) -> int:
        return self.entries[min(self.idx, len(self.entries) - 1)].minute

    @property
    def decision(self) -> Decision:
        return self._dec

    def travel_time(self, line_id: int, minute: int) -> int:
        return effective_travel_time(self.instance, line_id, minute, self.overrides)

    def state_hash(self) -> str:
        payload = repr((self.idx, self.bus_loc, self.bus_free, self.bus_used, self.trips,
                        sorted(self.covered.items(), key=lambda kv: (kv[0].minute, kv[0].cp_id)),
                        self.n_uncovered))
        return hashlib.sha256(payload.encode()).hexdigest()

    def statuses_at(self, now: int, dep_cp: int) -> list:
        inst = self.instance
        return [bus_status(inst, b, self.bus_used[b], self.bus_loc[b], self.bus_free[b], now, dep_cp)
                for b in range(inst.fleet_size)]

    def _prepare(self):
        if self.done:
            self._dec = None
            return
        inst = self.instance
        entry = self.entries[self.idx]
        now = entry.minute
        statuses = self.statuses_at(now, entry.cp_id)
        v_p, v_q = classify_buses(statuses, entry, self.mode, inst.r_min)
        if self.screening:
            res = build_target_set(v_p, v_q, inst.target_set_capacity)
            target = res.target_set
            mask = np.array([b != SENTINEL for b in target])
        else:
            res = None
            target = tuple(range(inst.fleet_size))
            ok = {s.bus_id for s in v_p} | {s.bus_id for s in v_q}
            mask = np.array([b in ok for b in target], dtype=bool)
        cpb = cp_features(inst, statuses, now)
        line = inst.line(entry.line_id)
        line_block = (line.departure_cp, line.terminal_cp, self.travel_time(line.id, now))
        vec = build_state(cpb, line_block, {s.bus_id: s for s in statuses}, target)
        self._dec = Decision(entry, statuses, v_p, v_q, res, target, mask, cpb, vec)

    def refresh(self):
        """Recompute the current decision after out-of-band changes (deadhead dispatch)."""
        self._prepare()

    # -- transitions ---------------------------------------------------
    def _step_context(self, bus: int) -> StepContext:
        dec = self._dec
        s = dec.statuses[bus]
        pool = dec.v_p + dec.v_q if self.mode == "offline" else dec.v_p
        used_pool = rest_order(x for x in pool if x.used)
        rank = next((i + 1 for i, x in enumerate(used_pool) if x.bus_id == bus), 0)
        from_vq = s.location != dec.entry.cp_id
        cpi = self.instance.cp_index
        u1 = u2 = 0.0
        if from_vq:
            c1 = dec.cp_block[cpi(s.location)]
            term = self.instance.line(dec.entry.line_id).terminal_cp
            c2 = dec.cp_block[cpi(term)]
            u1 = demand_degree(c1[2], c1[4])
            u2 = demand_degree(c2[2], c2[4])
        return StepContext(s.used, rank, len(used_pool), s.deadhead_needed if from_vq else 0,
                           from_vq, u1, u2, self.mode)

    def step(self, slot: int) -> StepOutcome:
        if self.done:
            raise ContractError("episode already finished")
        dec = self._dec
        if not (0 <= slot < len(dec.target)) or not dec.mask[slot]:
            raise ContractError(f"slot {slot} is masked or out of range")
        bus = dec.target[slot]
        ctx = self._step_context(bus)
        reward = step_reward(ctx, self.weights) if self.reward_mode == "combined" else 0.0
        inst = self.instance
        entry = dec.entry
        s = dec.statuses[bus]
        if s.location != entry.cp_id:
            dh_start = s.last_arrival_minute + inst.r_min
            self.trips.append(TripRecord(bus, "deadhead", s.location, entry.cp_id,
                                         dh_start, dh_start + s.deadhead_needed))
        line = inst.line(entry.line_id)
        arrive = entry.minute + self.travel_time(line.id, entry.minute)
        self.trips.append(TripRecord(bus, "service", line.departure_cp, line.terminal_cp,
                                     entry.minute, arrive, line.id))
        self.bus_loc[bus] = line.terminal_cp
        self.bus_free[bus] = arrive
        self.bus_used[bus] = True
        self.covered[entry] = bus
        self.log.append({"minute": entry.minute, "cp": entry.cp_id, "line": entry.line_id,
                         "bus": bus, "slot": slot, "deadhead": ctx.deadhead, "reward": reward})
        return self._advance(reward, {"bus": bus, "context": ctx})

    def skip_uncovered(self) -> StepOutcome:
        if self.done:
            raise ContractError("episode already finished")
        if self._dec.mask.any():
            raise ContractError("skip_uncovered called while eligible buses exist")
        entry = self._dec.entry
        self.covered[entry] = UNCOVERED
        self.n_uncovered += 1
        self.log.append({"minute": entry.minute, "cp": entry.cp_id, "line": entry.line_id,
                         "bus": None, "slot": None, "deadhead": 0, "reward": -self.weights.w1_step})
        return self._advance(-self.weights.w1_step, {"bus": None})

    def _advance(self, reward: float, info: dict) -> StepOutcome:
        self.idx += 1
        self._prepare()
        if self.done:
            report = self.report()
            reward += final_reward(report, self.weights)
            info["report"] = report
            return StepOutcome(None, reward, True, None, info)
        return StepOutcome(self._dec.vector, reward, False, self._dec.mask, info)

    def dispatch_deadhead(self, bus: int, to_cp: int, minute: int) -> TripRecord:
        """Send ``bus`` empty to ``to_cp`` as soon as it is free at or after ``minute``."""
        depart = max(minute, self.bus_free[bus])
        k = self.instance.deadhead(self.bus_loc[bus], to_cp)
        trip = TripRecord(bus, "deadhead", self.bus_loc[bus], to_cp, depart, depart + k)
        self.trips.append(trip)
        self.bus_loc[bus] = to_cp
        self.bus_free[bus] = depart + k
        self._prepare()
        return trip

    # -- results -------------------------------------------------------
    def schedule(self) -> Schedule:
        return Schedule(list(self.trips), dict(self.covered))

    def report(self) -> ObjectiveReport:
        return compute_objectives(self.instance, self.schedule())


Policy = Callable[[np.ndarray, np.ndarray], tuple]


def run_episode(sim: DispatchSim, policy: Policy, seed: Optional[int] = None,
                before_decision: Optional[Callable[[DispatchSim], None]] = None):
    """Drive ``sim`` to completion; returns (Schedule, ObjectiveReport, Trajectory).

    ``policy(state, mask)`` returns ``(slot, probability_of_slot)``.
    ``before_decision(sim)`` runs ahead of every decision (online deadheads).
    """
    sim.reset(seed)
    traj = Trajectory()
    while not sim.done:
        if before_decision is not None:
            before_decision(sim)
        dec = sim.decision
        state, mask = dec.vector, dec.mask
        if mask.any():
            slot, prob = policy(state, mask)
            out = sim.step(int(slot))
        else:
            slot, prob = -1, 1.0
            out = sim.skip_uncovered()
        traj.states.append(state)
        traj.masks.append(mask)
        traj.actions.append(int(slot))
        traj.probs.append(float(prob))
        traj.rewards.append(out.reward)
        traj.dones.append(out.done)
    return sim.schedule(), sim.report(), traj


def first_slot_policy(state, mask):
    """Always take the highest-priority eligible slot."""
    return int(np.flatnonzero(mask)[0]), 1.0


def random_policy(rng: np.random.Generator) -> Policy:
    def pick(state, mask):
        valid = np.flatnonzero(mask)
        return int(rng.choice(valid)), 1.0 / len(valid)
    return pick
