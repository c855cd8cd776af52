"""Online execution: per-departure bus selection plus time-window deadhead dispatch."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ProblemInstance, TravelTimeOverride
from .ppo import Hyperparams, TrainResult, greedy_policy, make_meta, policy_forward, train
from .reward import RewardWeights
from .sim import DispatchSim, run_episode

log = logging.getLogger(__name__)

DISRUPTION_EXTRA = 15
DISRUPTION_WINDOW = (810, 1000)  # 13:30 to 16:40


@dataclass(frozen=True)
class TimeWindowConfig:
    window_minutes: int = 60

    def __post_init__(self):
        if self.window_minutes <= 0:
            raise ValueError("window_minutes must be positive")


@dataclass(frozen=True)
class DeadheadOrder:
    bus_id: int
    from_cp: int
    to_cp: int
    dispatch_minute: int
    deadhead_minutes: int
    trigger_minute: int
    latest_departure: int


def latest_deadhead_departure(t_j: int, r_min: int, k: int) -> int:
    return t_j - r_min - k


def _offline_replay(sim: DispatchSim) -> DispatchSim:
    replay = sim.clone()
    replay.mode = "offline"
    replay.screening = True
    replay.n_slots = sim.instance.target_set_capacity
    replay.refresh()
    return replay


def plan_deadheads(sim: DispatchSim, offline_params, window_cfg: TimeWindowConfig = TimeWindowConfig()):
    """Replay the offline policy over the window and return the deadheads due now.

    A replayed selection of a relocating bus at departure ``t_j`` becomes an
    order when its latest departure ``t_j - r_min - k`` falls in
    ``[t_i, t_{i+1})``. The live ``sim`` is not modified.
    """
    if offline_params is None:
        raise ValueError("offline policy parameters are required for deadhead planning")
    if sim.done:
        return []
    inst = sim.instance
    entries = sim.entries
    i = sim.idx
    t_i = entries[i].minute
    t_next = entries[i + 1].minute if i + 1 < len(entries) else None
    horizon = t_i + window_cfg.window_minutes
    replay = _offline_replay(sim)
    pick = greedy_policy(offline_params)
    orders: list[DeadheadOrder] = []
    ordered, busy = set(), set()
    while not replay.done and replay.entries[replay.idx].minute <= horizon:
        j = replay.idx
        dec = replay.decision
        if not dec.mask.any():
            replay.skip_uncovered()
            continue
        slot, _ = pick(dec.vector, dec.mask)
        bus = dec.target[slot]
        s = dec.statuses[bus]
        if j > i and s.location != dec.entry.cp_id and bus not in ordered and bus not in busy:
            t_j = dec.entry.minute
            t_e = latest_deadhead_departure(t_j, inst.r_min, s.deadhead_needed)
            if t_next is not None and t_i <= t_e < t_next:
                orders.append(DeadheadOrder(bus, s.location, dec.entry.cp_id, t_i,
                                            s.deadhead_needed, t_j, t_e))
                ordered.add(bus)
        busy.add(bus)
        replay.step(slot)
    return orders


def deadhead_hook(offline_params, window_cfg: TimeWindowConfig = TimeWindowConfig(), record=None):
    """``before_decision`` callback that executes the planned deadheads on the live sim."""
    def hook(sim: DispatchSim):
        for order in plan_deadheads(sim, offline_params, window_cfg):
            sim.dispatch_deadhead(order.bus_id, order.to_cp, order.dispatch_minute)
            if record is not None:
                record.append(order)
    return hook


def online_step(sim: DispatchSim, online_params, offline_params,
                window_cfg: TimeWindowConfig = TimeWindowConfig()):
    """Dispatch due deadheads, then pick a bus for the current departure (argmax)."""
    deadhead_hook(offline_params, window_cfg)(sim)
    dec = sim.decision
    if not dec.mask.any():
        return sim.skip_uncovered()
    p = policy_forward(online_params, dec.vector, dec.mask)
    return sim.step(int(np.argmax(np.where(dec.mask, p, -1.0))))


def disruption_scenarios(instance: ProblemInstance) -> list[tuple[TravelTimeOverride, ...]]:
    lo, hi = DISRUPTION_WINDOW
    out = [(TravelTimeOverride(None, lo, hi, DISRUPTION_EXTRA),), ()]
    out += [(TravelTimeOverride(l.id, 0, 1440, DISRUPTION_EXTRA),) for l in instance.lines]
    return out


def random_scenario(instance: ProblemInstance, rng: np.random.Generator):
    """Global afternoon window, one line all day, or no disruption (equal odds)."""
    kind = int(rng.integers(0, 3))
    lo, hi = DISRUPTION_WINDOW
    if kind == 0:
        return (TravelTimeOverride(None, lo, hi, DISRUPTION_EXTRA),)
    if kind == 1:
        line = instance.lines[int(rng.integers(0, len(instance.lines)))]
        return (TravelTimeOverride(line.id, 0, 1440, DISRUPTION_EXTRA),)
    return ()


def train_online(instance: ProblemInstance, offline_params, hp: Hyperparams = Hyperparams(),
                 episodes: int = 500, seed: int = 0, *,
                 window_cfg: TimeWindowConfig = TimeWindowConfig(),
                 weights: RewardWeights = RewardWeights(), disruptions: bool = True,
                 init: Optional[dict] = None) -> TrainResult:
    """PPO for the online selection policy; deadheads come from the frozen offline policy."""
    scen_rng = np.random.default_rng([seed, 1])
    scenarios = [random_scenario(instance, scen_rng) if disruptions else () for _ in range(episodes)]
    factory = lambda ep: DispatchSim(instance, "online", weights=weights,
                                     overrides=scenarios[min(ep, episodes - 1)])
    res = train(instance, "online", hp, episodes, seed, weights=weights, sim_factory=factory,
                before_decision=lambda ep: deadhead_hook(offline_params, window_cfg), init=init)
    res.meta = make_meta(factory(0), hp, "ppo", {"window_minutes": window_cfg.window_minutes,
                                                  "disruptions": disruptions})
    return res


@dataclass
class OnlineRun:
    schedule: object
    report: object
    orders: list
    decisions: list
    total_reward: float


def simulate_online(instance: ProblemInstance, online_params, offline_params, overrides=None,
                    window_cfg: TimeWindowConfig = TimeWindowConfig(),
                    weights: RewardWeights = RewardWeights()) -> OnlineRun:
    """Argmax online run under ``overrides`` (instance overrides when None)."""
    if instance.deadhead_matrix and window_cfg.window_minutes <= max(map(max, instance.deadhead_matrix)) + instance.r_min:
        log.warning("time window %d min does not exceed max deadhead + r_min", window_cfg.window_minutes)
    sim = DispatchSim(instance, "online", weights=weights, overrides=overrides)
    orders = []
    schedule, report, traj = run_episode(sim, greedy_policy(online_params),
                                         before_decision=deadhead_hook(offline_params, window_cfg, orders))
    return OnlineRun(schedule, report, orders, sim.log, traj.total_reward)
