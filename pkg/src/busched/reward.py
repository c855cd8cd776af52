"""Final and step-wise rewards."""
from __future__ import annotations

from dataclasses import dataclass

from .model import ObjectiveReport


@dataclass(frozen=True)
class RewardWeights:
    w1_final: float = 4.0
    w2_final: float = 0.1
    w1_step: float = 4.0
    w2_step: float = 0.1
    w3_step: float = 2.0
    w4_step: float = 1.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v > 0:
                raise ValueError(f"reward weight {k} must be positive, got {v}")


@dataclass(frozen=True)
class StepContext:
    """Everything the step reward needs about one executed selection.

    ``rank`` is the selected bus's 1-based position among the used eligible
    buses sorted by descending rest; ``n_used_eligible`` is their count.
    """

    selected_used: bool
    rank: int
    n_used_eligible: int
    deadhead: float
    from_vq: bool
    u1: float
    u2: float
    mode: str = "offline"


def final_reward(report: ObjectiveReport, weights: RewardWeights = RewardWeights()) -> float:
    return -weights.w1_final * report.n_used - weights.w2_final * report.deadhead_total


def rest_rank_reward(p_v: int, n_o: int, used: bool = True) -> float:
    if not used:
        return 0.0
    if n_o <= 0 or not 1 <= p_v <= n_o:
        raise ValueError(f"inconsistent rank {p_v} among {n_o} used eligible buses")
    return (n_o - p_v) / n_o


def demand_degree(n_s_c: int, n_o_c: int) -> float:
    return n_s_c / (n_o_c + 1)


def step_reward(ctx: StepContext, weights: RewardWeights = RewardWeights()) -> float:
    r_n = 1.0 if (not ctx.selected_used and ctx.n_used_eligible > 0) else 0.0
    r_k = rest_rank_reward(ctx.rank, ctx.n_used_eligible, ctx.selected_used)
    if ctx.mode == "online":
        k, r_u = 0.0, 0.0
    else:
        k = float(ctx.deadhead)
        r_u = 1.0 if (ctx.from_vq and ctx.u1 > ctx.u2) else 0.0
    return (-weights.w1_step * r_n - weights.w2_step * k
            + weights.w3_step * r_k - weights.w4_step * r_u)
