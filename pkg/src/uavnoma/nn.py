"""Tanh multilayer perceptrons with hand-written backprop, a diagonal Gaussian
policy head and Adam. Batches are rows: inputs have shape (B, in_dim)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class Cache:
    inputs: list  # input to every layer
    pre: list  # pre-activation of every layer
    version: int


class Mlp:
    """Fully connected net; tanh on hidden layers, ``out_act`` on the output.

    Weights are stored as (fan_in, fan_out) so a layer is ``x @ W + b``.
    """

    def __init__(self, sizes, rng: np.random.Generator, out_act: str | None = None,
                 out_scale: float = 1.0):
        if out_act not in (None, "tanh"):
            raise ValueError(f"unsupported output activation {out_act!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.out_act = out_act
        self.params: list[np.ndarray] = []
        for k, (fi, fo) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            bound = 1.0 / math.sqrt(fi)
            w = rng.uniform(-bound, bound, size=(fi, fo))
            b = rng.uniform(-bound, bound, size=fo)
            if k == len(self.sizes) - 2:
                w *= out_scale
                b *= out_scale
            self.params += [w, b]
        self.version = 0

    @property
    def n_layers(self) -> int:
        return len(self.params) // 2

    def touch(self) -> None:
        """Mark parameters as modified; older caches become invalid."""
        self.version += 1

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Cache]:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input of shape (B, {self.sizes[0]}), got {x.shape}")
        inputs, pre = [], []
        h = x
        for k in range(self.n_layers):
            w, b = self.params[2 * k], self.params[2 * k + 1]
            inputs.append(h)
            z = h @ w + b
            pre.append(z)
            last = k == self.n_layers - 1
            h = z if last and self.out_act is None else np.tanh(z)
        return h, Cache(inputs, pre, self.version)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: Cache, gy: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of ``sum(gy * y)`` w.r.t. every parameter and the input."""
        if cache.version != self.version:
            raise RuntimeError("stale forward cache: parameters changed since forward()")
        grads: list[np.ndarray] = [None] * len(self.params)  # type: ignore[list-item]
        g = np.asarray(gy, dtype=float)
        for k in range(self.n_layers - 1, -1, -1):
            last = k == self.n_layers - 1
            if not (last and self.out_act is None):
                t = np.tanh(cache.pre[k])
                g = g * (1.0 - t * t)
            grads[2 * k] = cache.inputs[k].T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.params[2 * k].T
        return grads, g

    def state(self) -> list[np.ndarray]:
        return [p.copy() for p in self.params]

    def load(self, params) -> None:
        if len(params) != len(self.params):
            raise ValueError("parameter count mismatch")
        for dst, src in zip(self.params, params):
            src = np.asarray(src, dtype=float)
            if src.shape != dst.shape:
                raise ValueError(f"shape mismatch {src.shape} vs {dst.shape}")
            dst[...] = src
        self.touch()


class GaussianPolicy:
    """Diagonal Gaussian with a tanh-headed mean network and a free log-std."""

    def __init__(self, obs_dim: int, act_dim: int, hidden, rng: np.random.Generator,
                 init_log_std: float = -0.5, mean_bias=None):
        self.mean_net = Mlp((obs_dim, *hidden, act_dim), rng, out_act="tanh", out_scale=0.01)
        if mean_bias is not None:
            # pre-tanh bias giving the requested initial mean
            b = np.arctanh(np.clip(np.asarray(mean_bias, float), -0.999, 0.999))
            self.mean_net.params[-1][...] = b
        self.log_std = np.full(act_dim, float(init_log_std))
        self.act_dim = act_dim

    @property
    def params(self) -> list[np.ndarray]:
        return self.mean_net.params + [self.log_std]

    def touch(self) -> None:
        self.mean_net.touch()

    def mean(self, obs: np.ndarray) -> np.ndarray:
        return self.mean_net(np.atleast_2d(obs))

    def sample(self, obs: np.ndarray, rng: np.random.Generator):
        """Draw actions for a batch of observations.

        Returns (clipped action, pre-clip action, log-prob of the pre-clip action).
        """
        mu = self.mean(obs)
        std = np.exp(self.log_std)
        a = mu + std * rng.standard_normal(mu.shape)
        logp = gaussian_logp(a, mu, self.log_std)
        return np.clip(a, -1.0, 1.0), a, logp

    def log_prob(self, obs: np.ndarray, act: np.ndarray):
        mu, cache = self.mean_net.forward(np.atleast_2d(obs))
        act = np.atleast_2d(act)
        return gaussian_logp(act, mu, self.log_std), (cache, mu, act)

    def log_prob_backward(self, ctx, g_logp: np.ndarray) -> list[np.ndarray]:
        """Gradients of ``sum(g_logp * logp)`` w.r.t. ``params``."""
        cache, mu, act = ctx
        inv_var = np.exp(-2.0 * self.log_std)
        diff = act - mu
        g = np.asarray(g_logp, dtype=float)[:, None]
        g_mu = g * diff * inv_var
        g_logstd = (g * (diff * diff * inv_var - 1.0)).sum(axis=0)
        grads, _ = self.mean_net.backward(cache, g_mu)
        return grads + [g_logstd]

    def entropy(self) -> float:
        return float(np.sum(self.log_std + 0.5 * (LOG_2PI + 1.0)))


def gaussian_logp(a: np.ndarray, mu: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (a - mu) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG_2PI, axis=-1)


class Adam:
    """Bias-corrected Adam acting in place on a list of arrays."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads, maximize: bool = False) -> None:
        if len(grads) != len(self.params):
            raise ValueError("gradient count mismatch")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        sign = 1.0 if maximize else -1.0
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p += sign * self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        return {"t": self.t, "m": [a.copy() for a in self.m], "v": [a.copy() for a in self.v]}

    def load(self, state: dict) -> None:
        self.t = int(state["t"])
        for dst, src in zip(self.m, state["m"]):
            dst[...] = np.asarray(src, float)
        for dst, src in zip(self.v, state["v"]):
            dst[...] = np.asarray(src, float)
