"""Random benchmark instances and deletion-derived variants."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    BusLine,
    ControlPoint,
    ProblemInstance,
    Timetable,
    compute_objectives,
    merge_timetables,
)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    n_lines: int = 2
    departures_per_cp: int = 10
    span_start: int = 360
    span_end: int = 1320
    headway_bounds: tuple[int, int] = (15, 30)
    travel_time_bounds: tuple[int, int] = (25, 45)
    deadhead_bounds: tuple[int, int] = (8, 20)
    r_min: int = 5
    fleet_size: Optional[int] = None  # None: size the fleet from a greedy run
    spare_buses: int = 0
    target_set_capacity: int = 8
    deletion_fraction: float = 0.0
    seed: int = 0
    max_retries: int = 20

    def __post_init__(self):
        for name in ("headway_bounds", "travel_time_bounds", "deadhead_bounds"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be positive with lo <= hi")
        if self.n_lines < 1 or self.departures_per_cp < 1:
            raise ValueError("n_lines and departures_per_cp must be >= 1")
        if not 0 <= self.deletion_fraction < 1:
            raise ValueError("deletion_fraction must lie in [0, 1)")
        if not 0 <= self.span_start < self.span_end <= 1440:
            raise ValueError("service span must lie inside the day")


def _keep_entries(inst: ProblemInstance, fraction: float, rng) -> ProblemInstance:
    entries = merge_timetables(inst)
    n = len(entries)
    keep_n = int(round((1 - fraction) * n))
    if keep_n == n:
        return inst
    keep = sorted(rng.choice(n, size=keep_n, replace=False).tolist())
    by_cp = {tt.cp_id: [] for tt in inst.timetables}
    for i in keep:
        by_cp[entries[i].cp_id].append(entries[i].minute)
    tts = [Timetable(cp, tuple(sorted(m))) for cp, m in by_cp.items()]
    return inst.replace(timetables=tts)


def derive_instance(base: ProblemInstance, deletion_fraction: float, seed: int) -> ProblemInstance:
    """Delete ``round(f*N)`` combined-timetable departures uniformly at random."""
    if not 0 <= deletion_fraction < 1:
        raise ValueError("deletion_fraction must lie in [0, 1)")
    return _keep_entries(base, deletion_fraction, np.random.default_rng(seed))


def _with_fleet(inst: ProblemInstance, counts: dict) -> ProblemInstance:
    cps = [ControlPoint(cp.id, counts.get(cp.id, 0)) for cp in inst.control_points]
    return inst.replace(control_points=cps, fleet_size=sum(c.initial_bus_count for c in cps))


def greedy_fleet(inst: ProblemInstance) -> dict:
    """Buses per CP that greedy dispatch needs when spare buses wait at every CP."""
    from .baselines import greedy_schedule

    per_cp = {tt.cp_id: len(tt.departures) for tt in inst.timetables}
    big = _with_fleet(inst, per_cp)
    sched = greedy_schedule(big)
    init = big.initial_locations()
    used = {t.bus_id for t in sched.trips if t.kind == "service"}
    counts = {cp: 0 for cp in inst.cp_ids}
    for b in used:
        counts[init[b]] += 1
    return counts


def generate_instance(cfg: GeneratorConfig = GeneratorConfig()) -> ProblemInstance:
    from .baselines import greedy_schedule

    rng = np.random.default_rng(cfg.seed)
    for _ in range(cfg.max_retries):
        n_cp = 2 * cfg.n_lines
        cps = list(range(1, n_cp + 1))
        lines, tts = [], []
        travel = [int(rng.integers(cfg.travel_time_bounds[0], cfg.travel_time_bounds[1] + 1))
                  for _ in range(cfg.n_lines)]
        for r in range(cfg.n_lines):
            a, b = 2 * r + 1, 2 * r + 2
            lines.append(BusLine(a, a, b, travel[r]))
            lines.append(BusLine(b, b, a, travel[r]))
        for cp in cps:
            h = int(rng.integers(cfg.headway_bounds[0], cfg.headway_bounds[1] + 1))
            first = cfg.span_start + int(rng.integers(0, h))
            deps = [first + i * h for i in range(cfg.departures_per_cp)]
            tts.append(Timetable(cp, tuple(d for d in deps if d < cfg.span_end)))
        dh = np.zeros((n_cp, n_cp), dtype=int)
        for i in range(n_cp):
            for j in range(i + 1, n_cp):
                if i // 2 == j // 2:
                    dh[i, j] = travel[i // 2]
                else:
                    dh[i, j] = int(rng.integers(cfg.deadhead_bounds[0], cfg.deadhead_bounds[1] + 1))
                dh[j, i] = dh[i, j]
        inst = ProblemInstance(
            control_points=[ControlPoint(cp, 0) for cp in cps],
            lines=lines,
            timetables=tts,
            deadhead_matrix=dh.tolist(),
            r_min=cfg.r_min,
            fleet_size=0,
            target_set_capacity=cfg.target_set_capacity,
            name=f"gen-s{cfg.seed}",
        )
        inst = _keep_entries(inst, cfg.deletion_fraction, rng)
        if inst.n_departures() == 0:
            continue
        counts = greedy_fleet(inst)
        for _ in range(cfg.spare_buses):
            cp = cps[int(rng.integers(0, n_cp))]
            counts[cp] += 1
        if cfg.fleet_size is not None:
            need = sum(counts.values())
            if cfg.fleet_size < need:
                continue
            for i in range(cfg.fleet_size - need):
                counts[cps[i % n_cp]] += 1
        inst = _with_fleet(inst, counts)
        if compute_objectives(inst, greedy_schedule(inst)).n_uncovered == 0:
            return inst
    raise GenerationError(f"no coverable instance after {cfg.max_retries} attempts (seed {cfg.seed})")
