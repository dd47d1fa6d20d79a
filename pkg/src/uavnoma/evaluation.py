"""Deterministic evaluation, battery geometric means, baselines and the
generalization sweep."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uavnoma.config import RunConfig
from uavnoma.env import UavNomaEnv, write_episode_trace
from uavnoma.trainer import rollout_batch, train

Z95 = 1.959963984540054


def geo_mean_over_uavs(batteries) -> np.ndarray | float:
    """Geometric mean across the last axis (UAVs); exactly 0 if any entry is 0."""
    b = np.asarray(batteries, dtype=float)
    if np.any(b < 0):
        raise ValueError("battery levels must be >= 0")
    with np.errstate(divide="ignore"):
        out = np.where(np.all(b > 0, axis=-1), np.exp(np.log(np.where(b > 0, b, 1.0)).mean(-1)), 0.0)
    return float(out) if out.ndim == 0 else out


def geo_mean_over_time(trace) -> float:
    """Geometric mean of a battery trace, computed in log space."""
    b = np.asarray(trace, dtype=float)
    if np.any(b < 0):
        raise ValueError("battery levels must be >= 0")
    if np.any(b == 0):
        return 0.0
    return float(np.exp(np.log(b).mean()))


def mean_ci(x) -> tuple[float, float]:
    """Mean and 95% normal-approximation half-width."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(Z95 * x.std(ddof=1) / math.sqrt(len(x)))


class HoldAltitudePolicy:
    """Scripted reference: steer every UAV toward a fixed altitude at full speed
    and keep a constant raw access action (0 gives p = 1/N)."""

    def __init__(self, cfg: RunConfig, targets, access_raw: float = 0.0):
        self.cfg = cfg
        self.targets = np.asarray(targets, dtype=float)
        self.access_raw = access_raw
        self.act_dim = cfg.act_dim

    def mean(self, obs):
        obs = np.atleast_2d(obs)
        cfg = self.cfg
        e = cfg.energy
        m = cfg.network.n_uavs
        width = 2 * (cfg.env.history + 1) + 6
        z = e.z_min + obs[:, [k * width for k in range(m)]] * (e.z_max - e.z_min)
        step = np.where(self.targets > z, e.dz_max, -e.dz_min)
        raw = np.clip((self.targets - z) / step, -1.0, 1.0)
        acc = np.full((len(obs), 1), self.access_raw)
        return np.hstack([raw, acc])


@dataclass
class EvalReport:
    capacity: np.ndarray  # (R,) temporal average capacity per rollout, bps
    g_t: np.ndarray  # (R, M) temporal geometric-mean battery per UAV
    g_m: np.ndarray  # (R, H) cross-UAV geometric-mean battery per slot
    feasible: np.ndarray  # (R, M) terminal >= initial + B_min
    altitude: np.ndarray  # (R, H, M)
    battery: np.ndarray  # (R, H, M)
    p_access: np.ndarray  # (R, H)
    capacity_trace: np.ndarray  # (R, H)
    records: list = field(default_factory=list, repr=False)

    @property
    def capacity_mean_ci(self) -> tuple[float, float]:
        return mean_ci(self.capacity)

    @property
    def feasible_fraction(self) -> np.ndarray:
        """Per-UAV fraction of rollouts meeting the energy target."""
        return self.feasible.mean(axis=0)

    @property
    def all_feasible_fraction(self) -> float:
        return float(self.feasible.all(axis=1).mean())

    def altitude_correlation(self) -> float:
        """Mean over rollouts of the zero-lag Pearson correlation of the first
        two UAVs' altitude series (rollouts with a constant series skipped)."""
        vals = []
        for z in self.altitude:
            a, b = z[:, 0], z[:, 1]
            if a.std() > 0 and b.std() > 0:
                vals.append(float(np.corrcoef(a, b)[0, 1]))
        return float(np.mean(vals)) if vals else float("nan")

    def summary(self) -> dict:
        cap, ci = self.capacity_mean_ci
        return {
            "rollouts": int(len(self.capacity)),
            "capacity_bps_mean": cap,
            "capacity_bps_ci95": ci,
            "g_t_mean": self.g_t.mean(axis=0).tolist(),
            "g_t_min": self.g_t.min(axis=0).tolist(),
            "feasible_fraction": self.feasible_fraction.tolist(),
            "all_feasible_fraction": self.all_feasible_fraction,
            "terminal_battery_j_mean": self.battery[:, -1, :].mean(axis=0).tolist(),
            "altitude_correlation": (self.altitude_correlation()
                                     if self.altitude.shape[2] >= 2 else None),
        }


def evaluate(policy, cfg: RunConfig, episodes: int = 32, seed: int = 0,
             record: bool = False) -> EvalReport:
    """Roll out the policy mean (no sampling) on ``episodes`` fresh episodes."""
    if getattr(policy, "act_dim", cfg.act_dim) != cfg.act_dim:
        raise ValueError(f"policy acts in {policy.act_dim} dims, env needs {cfg.act_dim}")
    net = getattr(policy, "mean_net", None)
    if net is not None and net.sizes[0] != cfg.obs_dim:
        raise ValueError(f"policy expects {net.sizes[0]} inputs, env gives {cfg.obs_dim}")
    seeds = np.random.SeedSequence([seed, 0xE7A1]).spawn(episodes)
    envs = []
    for ss in seeds:
        env = UavNomaEnv(cfg, np.random.default_rng(ss), record=True)
        env.reset()
        envs.append(env)
    trajs = rollout_batch(envs, policy, None, np.zeros(cfg.network.n_uavs), None,
                          deterministic=True)
    e = cfg.energy
    alt = np.array([[r["z"] for r in env.records] for env in envs])
    bat = np.array([[r["battery"] for r in env.records] for env in envs])
    pac = np.array([[r["p_access"] for r in env.records] for env in envs])
    cap = np.array([tr.info["capacity"] for tr in trajs])
    b0 = np.array([env.b0 for env in envs])
    g_t = np.array([[geo_mean_over_time(bat[i, :, k]) for k in range(bat.shape[2])]
                    for i in range(len(envs))])
    return EvalReport(
        capacity=cap.mean(axis=1),
        g_t=g_t,
        g_m=geo_mean_over_uavs(bat),
        feasible=bat[:, -1, :] >= b0 + e.battery_min_j,
        altitude=alt,
        battery=bat,
        p_access=pac,
        capacity_trace=cap,
        records=[env.records for env in envs] if record else [],
    )


def write_report(report: EvalReport, out_dir: str | Path, traces: bool = True) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_report.json").write_text(json.dumps(report.summary(), indent=2) + "\n")
    if traces and report.records:
        for i, recs in enumerate(report.records):
            write_episode_trace(out / f"trace_{i:03d}.csv", recs)


def run_baseline(kind: str, cfg: RunConfig, seed: int | None = None,
                 out_dir: str | Path | None = None, **kw):
    """Train a fixed-multiplier agent: ``"unconstrained"`` or ``"rlws:<etas>"``."""
    if kind in ("unconstrained", "ppo"):
        mode = "ppo"
    elif kind.startswith("rlws"):
        mode = kind if ":" in kind else "rlws:" + ",".join(["10"] * cfg.network.n_uavs)
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    cfg = cfg.replace(mode=mode, **({} if seed is None else {"seed": seed}))
    return train(cfg, out_dir, **kw)


def generalization_cases(base: RunConfig, n_values=(100, 200, 600, 1000),
                         corners=None) -> dict[str, RunConfig]:
    """Config variants: initial altitudes, device counts and planar placements.

    ``corners`` are the planar points of the extreme placement; by default
    the two opposite corners of the deployment area.
    """
    e = base.energy
    m = base.network.n_uavs
    if corners is None:
        x0, y0, x1, y1 = base.network.area
        corners = ((x0, y0), (x1, y1))
    cases = {
        "base": base,
        "alt_all_min": base.replace(initial_altitudes=[e.z_min] * m),
        "alt_all_max": base.replace(initial_altitudes=[e.z_max] * m),
    }
    for n in n_values:
        cases[f"n_{n}"] = base.replace(n_devices=n)
    cases["xy_kmeans"] = base.replace(uav_xy="kmeans")
    if m == len(corners):
        cases["xy_corners"] = base.replace(uav_xy=[list(c) for c in corners])
    cases["xy_random"] = base.replace(uav_xy="random")
    return cases


def generalization_suite(policy, base: RunConfig, episodes: int = 32, seed: int = 0,
                         cases: dict[str, RunConfig] | None = None) -> dict[str, dict]:
    """Evaluate one policy on every case; capacity and per-UAV G_t for each."""
    cases = generalization_cases(base) if cases is None else cases
    out = {}
    for name, cfg in cases.items():
        rep = evaluate(policy, cfg, episodes, seed)
        summ = rep.summary()
        summ["g_t_positive_fraction"] = float((rep.g_t > 0).all(axis=1).mean())
        out[name] = summ
    return out


def write_long_csv(path: str | Path, rows) -> None:
    """Plot-ready long format: one (series, x, value) triple per row."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["series", "x", "value"])
        for series, x, value in rows:
            w.writerow([series, x, repr(float(value))])
