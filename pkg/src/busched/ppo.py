"""PPO-clip (and a REINFORCE arm) over the dispatch simulator."""
from __future__ import annotations

import hashlib
import io as _io
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .model import ProblemInstance
from .nn import PARAM_NAMES, Adam, backward, forward, init_params, masked_softmax, shapes
from .reward import RewardWeights
from .sim import DispatchSim, Trajectory, run_episode

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hyperparams:
    clip_eps: float = 0.1
    gamma: float = 0.99
    lr: float = 1e-5
    adam_eps: float = 1e-5
    epochs: int = 10
    episodes_per_iter: int = 4
    minibatch_size: Optional[int] = 8  # None: full batch
    critic_coef: float = 1.0
    normalize_advantages: bool = False

    def __post_init__(self):
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")


class UpdateError(FloatingPointError):
    pass


# -- policy / value heads ------------------------------------------------

def policy_forward(params, state, mask) -> np.ndarray:
    logits, _, _ = forward(params, state)
    p = masked_softmax(logits, mask)
    return p[0] if np.ndim(state) == 1 else p


def value_forward(params, state) -> float:
    _, v, _ = forward(params, state)
    return float(v[0]) if np.ndim(state) == 1 else v


def rewards_to_go(rewards, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def advantages(returns, values) -> np.ndarray:
    return np.asarray(returns, dtype=float) - np.asarray(values, dtype=float)


def clip_objective(ratio, adv, eps: float):
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(adv, dtype=float)
    g = np.where(adv >= 0, (1 + eps) * adv, (1 - eps) * adv)
    out = np.minimum(ratio * adv, g)
    return float(out) if out.ndim == 0 else out


# -- losses --------------------------------------------------------------

@dataclass
class Batch:
    states: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    old_probs: np.ndarray
    returns: np.ndarray
    advantages: np.ndarray

    def __len__(self):
        return len(self.actions)

    def subset(self, idx):
        return Batch(self.states[idx], self.masks[idx], self.actions[idx], self.old_probs[idx],
                     self.returns[idx], self.advantages[idx])


def make_batch(params, trajectories: list[Trajectory], gamma: float,
               normalize: bool = False) -> Batch:
    """Attach rewards-to-go and advantages (under the current critic) and stack."""
    for tr in trajectories:
        tr.returns = rewards_to_go(tr.rewards, gamma)
        v = value_forward(params, np.asarray(tr.states))
        tr.advantages = advantages(tr.returns, v)
    cat = lambda key: np.concatenate([np.asarray(getattr(t, key)) for t in trajectories])
    adv = np.concatenate([t.advantages for t in trajectories])
    if normalize and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return Batch(
        states=np.vstack([np.asarray(t.states) for t in trajectories]),
        masks=np.vstack([np.asarray(t.masks) for t in trajectories]),
        actions=cat("actions").astype(int),
        old_probs=cat("probs").astype(float),
        returns=cat("returns"),
        advantages=adv,
    )


def _action_terms(params, batch: Batch):
    acted = batch.actions >= 0
    logits, values, cache = forward(params, batch.states)
    probs = np.zeros_like(logits)
    if acted.any():
        probs[acted] = masked_softmax(logits[acted], batch.masks[acted])
    onehot = np.zeros_like(logits)
    onehot[np.flatnonzero(acted), batch.actions[acted]] = 1.0
    return acted, values, cache, probs, onehot


def ppo_loss_and_grads(params, batch: Batch, hp: Hyperparams):
    """Loss = -mean clip objective + critic_coef * mean squared value error."""
    acted, values, cache, probs, onehot = _action_terms(params, batch)
    n_act = max(int(acted.sum()), 1)
    n = len(batch)
    idx = np.flatnonzero(acted)
    pa = probs[idx, batch.actions[idx]]
    ratio = pa / batch.old_probs[idx]
    adv = batch.advantages[idx]
    surr = clip_objective(ratio, adv, hp.clip_eps)
    eps = hp.clip_eps
    active = np.where(adv >= 0, ratio < 1 + eps, ratio > 1 - eps)
    d_logits = np.zeros_like(probs)
    coef = -(active * ratio * adv) / n_act
    d_logits[idx] = coef[:, None] * (onehot[idx] - probs[idx])
    err = values - batch.returns
    d_values = hp.critic_coef * 2.0 * err / n
    loss = -float(np.sum(surr)) / n_act + hp.critic_coef * float(np.mean(err ** 2))
    return loss, backward(params, cache, d_logits, d_values)


def reinforce_loss_and_grads(params, batch: Batch, hp: Hyperparams):
    """Loss = -mean(R_t * log pi(a_t|s_t)); the critic receives no gradient."""
    acted, _, cache, probs, onehot = _action_terms(params, batch)
    n_act = max(int(acted.sum()), 1)
    idx = np.flatnonzero(acted)
    pa = probs[idx, batch.actions[idx]]
    ret = batch.returns[idx]
    loss = -float(np.sum(ret * np.log(pa))) / n_act
    d_logits = np.zeros_like(probs)
    d_logits[idx] = (-ret / n_act)[:, None] * (onehot[idx] - probs[idx])
    grads = backward(params, cache, d_logits, np.zeros(len(batch)))
    grads["Wc"][:] = 0.0
    grads["bc"][:] = 0.0
    return loss, grads


def _apply(params, batch: Batch, hp: Hyperparams, opt: Adam, loss_fn, rng=None) -> dict:
    snapshot = {k: v.copy() for k, v in params.items()}
    opt_state = opt.state()
    losses = []
    n = len(batch)
    mb = hp.minibatch_size or n
    for _ in range(hp.epochs):
        order = np.arange(n) if rng is None or mb >= n else rng.permutation(n)
        for start in range(0, n, mb):
            sub = batch if mb >= n else batch.subset(order[start:start + mb])
            loss, grads = loss_fn(params, sub, hp)
            if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                params.update(snapshot)
                opt.restore(opt_state)
                raise UpdateError("non-finite loss or gradient; update rolled back")
            opt.step(params, grads)
            losses.append(loss)
    if not all(np.isfinite(v).all() for v in params.values()):
        params.update(snapshot)
        opt.restore(opt_state)
        raise UpdateError("non-finite parameters after update; rolled back")
    return {"loss": float(np.mean(losses)), "steps": len(losses)}


def update(params, batch: Batch, hp: Hyperparams, opt: Adam, rng=None) -> dict:
    return _apply(params, batch, hp, opt, ppo_loss_and_grads, rng)


def reinforce_update(params, batch: Batch, hp: Hyperparams, opt: Adam, rng=None) -> dict:
    return _apply(params, batch, hp, opt, reinforce_loss_and_grads, rng)


# -- policies ------------------------------------------------------------

def sampling_policy(params, rng: np.random.Generator):
    def pick(state, mask):
        p = policy_forward(params, state, mask)
        a = int(rng.choice(len(p), p=p))
        return a, float(p[a])
    return pick


def greedy_policy(params):
    def pick(state, mask):
        p = policy_forward(params, state, mask)
        a = int(np.argmax(np.where(mask, p, -1.0)))
        return a, float(p[a])
    return pick


# -- training ------------------------------------------------------------

@dataclass
class TrainResult:
    params: dict
    curve: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def config_hash(**config) -> str:
    blob = json.dumps(config, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_meta(sim: DispatchSim, hp: Hyperparams, algo: str, extra=None) -> dict:
    cfg = {"hyperparams": asdict(hp), "weights": asdict(sim.weights), "mode": sim.mode,
           "reward_mode": sim.reward_mode, "screening": sim.screening, "algo": algo}
    if extra:
        cfg.update(extra)
    return {"state_dim": sim.dim, "n_slots": sim.n_slots, "config": cfg,
            "config_hash": config_hash(**cfg)}


def train(instance: ProblemInstance, mode: str = "offline", hp: Hyperparams = Hyperparams(),
          episodes: int = 1000, seed: int = 0, *, algo: str = "ppo",
          weights: RewardWeights = RewardWeights(), reward_mode: str = "combined",
          screening: bool = True, sim_factory: Optional[Callable[[int], DispatchSim]] = None,
          before_decision=None, init: Optional[dict] = None, callback=None) -> TrainResult:
    """Collect episodes and update the policy; the curve holds one accumulated reward per episode.

    ``sim_factory(episode)`` may supply per-episode simulators (online
    training uses it for disruption scenarios).
    """
    if algo not in ("ppo", "reinforce"):
        raise ValueError(f"unknown algorithm {algo!r}")
    rng = np.random.default_rng(seed)
    if sim_factory is None:
        sim_factory = lambda ep: DispatchSim(instance, mode, weights=weights,
                                             reward_mode=reward_mode, screening=screening)
    probe = sim_factory(0)
    params = init_params(probe.dim, probe.n_slots, rng) if init is None else {
        k: v.copy() for k, v in init.items()}
    opt = Adam(hp.lr, hp.adam_eps)
    upd = update if algo == "ppo" else reinforce_update
    curve = []
    ep = 0
    while ep < episodes:
        batch_trajs = []
        for _ in range(min(hp.episodes_per_iter, episodes - ep)):
            sim = sim_factory(ep)
            hook = before_decision(ep) if before_decision is not None else None
            _, report, traj = run_episode(sim, sampling_policy(params, rng), seed=seed + ep,
                                          before_decision=hook)
            curve.append(traj.total_reward)
            batch_trajs.append(traj)
            if callback is not None:
                callback(ep, traj, report)
            ep += 1
        batch = make_batch(params, batch_trajs, hp.gamma, hp.normalize_advantages)
        if (batch.actions >= 0).any():
            try:
                upd(params, batch, hp, opt, rng)
            except UpdateError as err:
                log.warning("episode %d: %s", ep, err)
    meta = make_meta(probe, hp, algo)
    return TrainResult(params, curve, meta)


def evaluate(instance: ProblemInstance, params, mode: str = "offline", *, screening: bool = True,
             weights: RewardWeights = RewardWeights(), reward_mode: str = "combined",
             sim: Optional[DispatchSim] = None, before_decision=None):
    """Argmax rollout; returns (Schedule, ObjectiveReport, Trajectory, sim)."""
    if sim is None:
        sim = DispatchSim(instance, mode, weights=weights, reward_mode=reward_mode, screening=screening)
    schedule, report, traj = run_episode(sim, greedy_policy(params), before_decision=before_decision)
    return schedule, report, traj, sim


# -- persistence ---------------------------------------------------------

class ModelFileError(ValueError):
    pass


def save_params(params, path, meta: dict) -> None:
    meta = dict(meta)
    meta["shapes"] = {k: list(v) for k, v in shapes(params).items()}
    buf = _io.BytesIO()
    np.savez(buf, __meta__=np.array(json.dumps(meta, sort_keys=True)),
             **{k: params[k] for k in PARAM_NAMES})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(buf.getvalue())
    tmp.replace(path)


def load_params(path, *, state_dim: Optional[int] = None, n_slots: Optional[int] = None,
                config_hash: Optional[str] = None):
    """Returns (params, meta); rejects files whose shapes do not fit the instance."""
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            params = {k: z[k].copy() for k in PARAM_NAMES}
    except (OSError, KeyError, ValueError) as err:
        raise ModelFileError(f"{path}: cannot read model file ({err})") from None
    for k, shp in meta.get("shapes", {}).items():
        if tuple(params[k].shape) != tuple(shp):
            raise ModelFileError(f"{path}: tensor {k} has shape {params[k].shape}, header says {shp}")
    if state_dim is not None and meta["state_dim"] != state_dim:
        raise ModelFileError(f"{path}: model expects state dimension {meta['state_dim']}, instance gives {state_dim}")
    if n_slots is not None and meta["n_slots"] != n_slots:
        raise ModelFileError(f"{path}: model has {meta['n_slots']} action slots, instance needs {n_slots}")
    if config_hash is not None and meta.get("config_hash") != config_hash:
        warnings.warn(f"{path}: config hash {meta.get('config_hash')} differs from {config_hash}")
    return params, meta
