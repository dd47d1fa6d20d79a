"""Episodic constrained MDP over the multi-UAV network.

One step is one system slot: the UAVs move by the requested displacement,
devices re-associate, L access sub-slots are simulated with the access
probability chosen on the previous step, and batteries are updated.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uavnoma import channel, energy, geometry
from uavnoma.config import ConfigError, RunConfig


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    costs: np.ndarray
    done: bool
    info: dict = field(default_factory=dict)


def scale_action(raw: np.ndarray, cfg: RunConfig) -> tuple[np.ndarray, float]:
    """Map a raw action in [-1, 1]^(M+1) to (displacements in m, access probability)."""
    raw = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
    m = cfg.network.n_uavs
    if raw.shape != (m + 1,):
        raise ValueError(f"expected action of shape ({m + 1},), got {raw.shape}")
    e = cfg.energy
    dz = e.dz_min + 0.5 * (raw[:m] + 1.0) * (e.dz_max - e.dz_min)
    p = max(cfg.env.p_min, 0.5 * (raw[m] + 1.0) * cfg.network.p_max)
    return dz, p


def constraint_bound(cfg: RunConfig) -> np.ndarray:
    return np.full(cfg.network.n_uavs, cfg.constraint_bound)


def _db_feature(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.log10(x[pos]) / 10.0  # dB / 100
    return out


class UavNomaEnv:
    """Single-instance environment; owns its generator and all mutable state.

    Parameters
    ----------
    cfg : RunConfig
    rng : numpy Generator (or int seed) used for deployment, fading, access
        and battery noise.
    devices : optional fixed (N, 2) deployment; redrawn every reset otherwise.
    record : keep per-step records for trace export.
    """

    def __init__(self, cfg: RunConfig, rng: np.random.Generator | int | None = None,
                 devices: np.ndarray | None = None, record: bool = False):
        self.cfg = cfg
        self.rng = np.random.default_rng(rng)
        self.fixed_devices = None if devices is None else np.asarray(devices, float)
        if self.fixed_devices is not None and len(self.fixed_devices) != cfg.network.n_devices:
            raise ConfigError("devices: deployment size differs from n_devices")
        self.record = record
        self.records: list[dict] = []
        self.outcomes: list[channel.SlotOutcome] = []
        self.t = 0
        self.done = True

    # -- state helpers -------------------------------------------------
    def _placement(self) -> np.ndarray:
        net = self.cfg.network
        if isinstance(net.uav_xy, str):
            if net.uav_xy == "kmeans":
                return geometry.kmeans_xy(self.devices, net.n_uavs, self.rng,
                                          net.kmeans_max_iters, net.kmeans_tol,
                                          restarts=net.kmeans_restarts)
            x0, y0, x1, y1 = net.area
            return self.rng.uniform((x0, y0), (x1, y1), size=(net.n_uavs, 2))
        return np.array(net.uav_xy, dtype=float)

    def uav_positions(self, z: np.ndarray | None = None) -> np.ndarray:
        z = self.z if z is None else z
        return np.column_stack([self.xy, z])

    def observation(self) -> np.ndarray:
        e = self.cfg.energy
        zs = (self.z_hist - e.z_min) / (e.z_max - e.z_min)  # (h+1, M)
        bs = self.b_hist / e.battery_max_j
        st = self.snir.as_matrix()  # (M, 6)
        feats = np.column_stack([
            st[:, 0], st[:, 1], _db_feature(st[:, 2]), _db_feature(st[:, 3]),
            np.log10(1.0 + st[:, 4]) / 10.0, np.log10(1.0 + st[:, 5]) / 10.0,
        ])
        return np.concatenate([zs.T, bs.T, feats], axis=1).ravel()

    # -- episode API ---------------------------------------------------
    def reset(self, rng: np.random.Generator | int | None = None) -> np.ndarray:
        if rng is not None:
            self.rng = np.random.default_rng(rng)
        cfg = self.cfg
        net, e = cfg.network, cfg.energy
        z0 = np.array(net.initial_altitudes, dtype=float)
        if np.any(z0 < e.z_min) or np.any(z0 > e.z_max):
            raise ConfigError(f"initial_altitudes: outside [{e.z_min}, {e.z_max}]")
        if self.fixed_devices is not None:
            self.devices = self.fixed_devices
        else:
            self.devices = geometry.deploy_devices(net.n_devices, net.area, self.rng)
        self.xy = self._placement()
        self.z = z0
        self.b = np.full(net.n_uavs, e.initial_battery_frac * e.battery_max_j)
        self.b0 = self.b.copy()
        h = cfg.env.history + 1
        self.z_hist = np.tile(self.z, (h, 1))
        self.b_hist = np.tile(self.b, (h, 1))
        self.p = 1.0 / net.n_devices
        self.assoc = geometry.associate(self.devices, self.uav_positions())
        warm = channel.simulate_slot(self.devices, self.uav_positions(), self.assoc.owner,
                                     self.p, net, self.rng)
        self.snir = warm.snir
        self.t = 0
        self.done = False
        self.records = []
        self.outcomes = []
        return self.observation()

    def step(self, action_raw: np.ndarray) -> StepResult:
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        cfg = self.cfg
        net, e = cfg.network, cfg.energy
        dz, p_next = scale_action(action_raw, cfg)
        z_prev = self.z
        z_new = np.clip(z_prev + dz, e.z_min, e.z_max)
        uavs = self.uav_positions(z_new)
        self.assoc = geometry.associate(self.devices, uavs)
        p_used = self.p
        out = channel.simulate_slot(self.devices, uavs, self.assoc.owner, p_used, net, self.rng)
        e_h = energy.harvest_energy(z_prev, z_new, e)
        e_c = energy.consumption_energy(z_prev, z_new, e)
        b_prev = self.b
        b_new = energy.battery_step(b_prev, e_h, e_c, self.rng, e)
        costs = (b_prev - b_new) / e.battery_max_j
        reward = out.mean_rate / cfg.env.horizon

        self.z, self.b, self.p, self.snir = z_new, b_new, p_next, out.snir
        self.z_hist = np.vstack([z_new[None], self.z_hist[:-1]])
        self.b_hist = np.vstack([b_new[None], self.b_hist[:-1]])
        self.t += 1
        self.done = self.t >= cfg.env.horizon
        info = {"capacity_bps": out.mean_rate, "p_access": p_used, "z": z_new,
                "battery": b_new, "harvest": e_h, "consume": e_c,
                "served": np.bincount(self.assoc.owner, minlength=net.n_uavs)}
        if self.record:
            self.records.append({"step": self.t - 1, "reward": reward, "costs": costs, **info})
            self.outcomes.append(out)
        return StepResult(self.observation(), reward, costs, self.done, info)


TRACE_FIELDS = ["step", "uav", "z", "B_joules", "capacity_bps", "p_access", "reward"]


def write_episode_trace(path: str | Path, records: list[dict]) -> None:
    """One row per (step, UAV); energies also reported in Wh."""
    m = len(records[0]["z"]) if records else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS + [f"cost_{k + 1}" for k in range(m)]
                   + ["B_wh", "harvest_j", "consume_j", "served"])
        for r in records:
            for k in range(m):
                w.writerow([r["step"], k, repr(float(r["z"][k])), repr(float(r["battery"][k])),
                            repr(float(r["capacity_bps"])), repr(float(r["p_access"])),
                            repr(float(r["reward"])),
                            *(repr(float(c)) for c in r["costs"]),
                            repr(float(r["battery"][k]) / 3600.0),
                            repr(float(r["harvest"][k])), repr(float(r["consume"][k])),
                            int(r["served"][k])])


def episode_cost_sums(costs: np.ndarray) -> np.ndarray:
    """Per-UAV undiscounted sum of normalized costs over an episode."""
    return np.asarray(costs, dtype=float).sum(axis=0)

