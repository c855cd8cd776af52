"""Shared-trunk actor-critic MLP in numpy with explicit backpropagation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TRUNK = ((128, "relu"), (64, "linear"), (32, "relu"))
PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3", "Wa", "ba", "Wc", "bc")


_TINY = np.finfo(float).tiny


class AllMaskedError(ValueError):
    pass


def init_params(state_dim: int, n_actions: int, rng: np.random.Generator,
                trunk=TRUNK) -> dict[str, np.ndarray]:
    """Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases."""
    sizes = [state_dim] + [n for n, _ in trunk]
    p = {}
    for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:]), start=1):
        lim = np.sqrt(1.0 / fan_in)
        p[f"W{i}"] = rng.uniform(-lim, lim, size=(fan_in, fan_out))
        p[f"b{i}"] = np.zeros(fan_out)
    lim = np.sqrt(1.0 / sizes[-1])
    p["Wa"] = rng.uniform(-lim, lim, size=(sizes[-1], n_actions))
    p["ba"] = np.zeros(n_actions)
    p["Wc"] = rng.uniform(-lim, lim, size=(sizes[-1], 1))
    p["bc"] = np.zeros(1)
    return p


def shapes(params) -> dict[str, tuple]:
    return {k: tuple(params[k].shape) for k in PARAM_NAMES}


def forward(params, X):
    """Returns (logits, values, cache) for a batch ``X`` of shape (B, d)."""
    X = np.atleast_2d(X)
    z1 = X @ params["W1"] + params["b1"]
    h1 = np.maximum(z1, 0.0)
    h2 = h1 @ params["W2"] + params["b2"]
    z3 = h2 @ params["W3"] + params["b3"]
    h3 = np.maximum(z3, 0.0)
    logits = h3 @ params["Wa"] + params["ba"]
    values = (h3 @ params["Wc"] + params["bc"])[:, 0]
    return logits, values, (X, z1, h1, h2, z3, h3)


def masked_softmax(logits, mask):
    logits = np.atleast_2d(logits)
    mask = np.atleast_2d(mask).astype(bool)
    if not mask.any(axis=1).all():
        raise AllMaskedError("every action slot is masked")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def backward(params, cache, d_logits, d_values):
    """Gradients of a scalar loss given dL/dlogits (B, A) and dL/dvalues (B,)."""
    X, z1, h1, h2, z3, h3 = cache
    g = {}
    g["Wa"] = h3.T @ d_logits
    g["ba"] = d_logits.sum(axis=0)
    dv = d_values[:, None]
    g["Wc"] = h3.T @ dv
    g["bc"] = dv.sum(axis=0)
    dh3 = d_logits @ params["Wa"].T + dv @ params["Wc"].T
    dz3 = dh3 * (z3 > 0)
    g["W3"] = h2.T @ dz3
    g["b3"] = dz3.sum(axis=0)
    dh2 = dz3 @ params["W3"].T
    g["W2"] = h1.T @ dh2
    g["b2"] = dh2.sum(axis=0)
    dz1 = (dh2 @ params["W2"].T) * (z1 > 0)
    g["W1"] = X.T @ dz1
    g["b1"] = dz1.sum(axis=0)
    return g


@dataclass
class Adam:
    """Adam with the moments of all tensors kept in one flat vector."""

    lr: float = 1e-5
    eps: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999

    def __post_init__(self):
        self.t = 0
        self.m = None
        self.v = None

    def step(self, params, grads):
        keys = [k for k in PARAM_NAMES if k in grads]
        g = np.concatenate([grads[k].ravel() for k in keys])
        if self.m is None:
            self.m = np.zeros_like(g)
            self.v = np.zeros_like(g)
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1 - b1) * g
        # moments of dead units decay geometrically; subnormal floats are very slow
        self.m[np.abs(self.m) < _TINY] = 0.0
        self.v *= b2
        self.v += (1 - b2) * g * g
        vhat = self.v / (1 - b2 ** self.t)
        upd = (self.lr / (1 - b1 ** self.t)) * self.m / (np.sqrt(vhat) + self.eps)
        off = 0
        for k in keys:
            n = params[k].size
            params[k] -= upd[off:off + n].reshape(params[k].shape)
            off += n

    def state(self):
        copy = lambda a: None if a is None else a.copy()
        return self.t, copy(self.m), copy(self.v)

    def restore(self, st):
        self.t, self.m, self.v = st
