"""Experiment orchestration shared by the CLI and the acceptance suite."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from .baselines import LnsConfig, greedy_schedule, lns_improve
from .io import write_atomic
from .model import ObjectiveReport, ProblemInstance, Schedule
from .ppo import Hyperparams, evaluate, train

ALGOS = ("ppo", "reinforce", "greedy", "lns")
LEARNERS = ("ppo", "reinforce")
REPORT_COLUMNS = ("instance", "algo", "scheme", "n_used", "deadhead_total", "n_uncovered")


@dataclass
class ExperimentConfig:
    instance: str = ""
    mode: str = "offline"
    algo: str = "ppo"
    reward_mode: str = "combined"
    screening: bool = True
    episodes: int = 1000
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "."

    def __post_init__(self):
        if self.mode not in ("offline", "online"):
            raise ValueError(f"mode must be offline or online, got {self.mode!r}")
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.reward_mode not in ("combined", "final_only"):
            raise ValueError(f"reward_mode must be combined or final_only, got {self.reward_mode!r}")
        if self.algo not in LEARNERS and (self.reward_mode != "combined" or not self.screening):
            raise ValueError("reward_mode and screening settings apply to learning algorithms only")
        if self.algo not in LEARNERS and self.mode == "online":
            raise ValueError("baselines run offline only")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**data)


def baseline_schedule(instance: ProblemInstance, algo: str, lns_cfg: LnsConfig = LnsConfig()) -> Schedule:
    sched = greedy_schedule(instance)
    if algo == "lns":
        sched = lns_improve(instance, sched, lns_cfg)
    elif algo != "greedy":
        raise ValueError(f"not a baseline: {algo!r}")
    return sched


def report_row(instance_name: str, algo: str, report: ObjectiveReport, scheme: str = "") -> dict:
    return {"instance": instance_name, "algo": algo, "scheme": scheme, "n_used": report.n_used,
            "deadhead_total": report.deadhead_total, "n_uncovered": report.n_uncovered}


def rows_to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def format_table(rows, columns=("algo", "scheme", "n_used", "deadhead_total", "n_uncovered")) -> str:
    head = {"n_used": "N_u", "deadhead_total": "T_d", "n_uncovered": "N_d"}
    cols = [c for c in columns if any(r.get(c) not in ("", None) for r in rows)]
    cells = [[head.get(c, c) for c in cols]] + [[str(r.get(c, "")) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    return "\n".join("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells)


def curve_csv(curves: dict) -> str:
    """``curves`` maps (arm, seed) to per-episode accumulated rewards."""
    rows = []
    for (arm, seed), curve in curves.items():
        rows += [{"arm": arm, "seed": seed, "episode": i, "accumulated_reward": repr(float(v))}
                 for i, v in enumerate(curve)]
    return rows_to_csv(rows, ("arm", "seed", "episode", "accumulated_reward"))


ABLATION_ARMS = {
    "reward": [("combined", {"reward_mode": "combined"}), ("final_only", {"reward_mode": "final_only"})],
    "screening": [("screening_on", {"screening": True}), ("screening_off", {"screening": False})],
    "algo": [("ppo", {"algo": "ppo"}), ("reinforce", {"algo": "reinforce"})],
}


@dataclass
class ArmResult:
    arm: str
    seed: int
    report: ObjectiveReport
    curve: list
    seconds: float
    state_dim: int


def run_ablation(instance: ProblemInstance, arms: str, episodes: int, seeds,
                 hp: Hyperparams = Hyperparams()) -> list[ArmResult]:
    out = []
    for seed in seeds:
        for name, kw in ABLATION_ARMS[arms]:
            kw = dict(kw)
            t0 = time.perf_counter()
            res = train(instance, "offline", hp, episodes, seed, **kw)
            secs = time.perf_counter() - t0
            screening = kw.get("screening", True)
            _, report, _, sim = evaluate(instance, res.params, screening=screening,
                                         reward_mode=kw.get("reward_mode", "combined"))
            out.append(ArmResult(name, seed, report, res.curve, secs, sim.dim))
    return out


def write_ablation(results: list[ArmResult], arms: str, outdir, instance_name: str = "") -> list[Path]:
    outdir = Path(outdir)
    paths = []
    for name, _ in ABLATION_ARMS[arms]:
        curves = {(r.arm, r.seed): r.curve for r in results if r.arm == name}
        p = outdir / f"curve_{name}.csv"
        write_atomic(p, curve_csv(curves))
        paths.append(p)
    # wall-clock stays out of the CSV so repeated runs are byte-identical
    rows = [dict(report_row(instance_name, r.arm, r.report), seed=r.seed, state_dim=r.state_dim)
            for r in results]
    p = outdir / f"ablation_{arms}.csv"
    write_atomic(p, rows_to_csv(rows, REPORT_COLUMNS + ("seed", "state_dim")))
    paths.append(p)
    return paths
