"""Lagrangian primal-dual PPO-clip trainer.

Each epoch: every worker rolls out its share of episodes with the current
stochastic policy, rewards are penalized with the current multipliers,
advantages come from GAE, then the policy takes clipped-surrogate ascent
steps (stopping early on KL), the value net regresses on rewards-to-go, and
the multipliers take one projected gradient step on the constraint slack.

Worker gradients are averaged in worker-index order, so a run is fully
determined by (config, seed, worker count) whether workers run in-process
or in a process pool.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from uavnoma import _kernels
from uavnoma.config import RunConfig, parse_mode
from uavnoma.env import UavNomaEnv
from uavnoma.nn import Adam, GaussianPolicy, Mlp

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Raised when an epoch produces a non-finite loss or a worker fails."""


@dataclass
class Trajectory:
    obs: np.ndarray  # (H, obs_dim)
    act: np.ndarray  # (H, act_dim) pre-clip actions
    logp: np.ndarray  # (H,)
    rew: np.ndarray  # (H,)
    costs: np.ndarray  # (H, M)
    pen_rew: np.ndarray  # (H,)
    val: np.ndarray  # (H,)
    adv: np.ndarray | None = None
    ret: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rew)


# -- scalar pieces ------------------------------------------------------------

def penalized_reward(r, costs, eta):
    """Reward minus the multiplier-weighted costs (works on scalars or batches)."""
    return np.asarray(r, float) - np.asarray(costs, float) @ np.asarray(eta, float)


def compute_gae(pen_rew, values, zeta: float, xi: float, last_value: float = 0.0):
    """GAE advantages for one horizon-cut trajectory (terminal value 0 by default)."""
    v = np.append(np.asarray(values, float), last_value)
    deltas = np.asarray(pen_rew, float) + zeta * v[1:] - v[:-1]
    return _kernels.discount_cumsum(deltas, zeta * xi)


def rewards_to_go(pen_rew, zeta: float):
    return _kernels.discount_cumsum(np.asarray(pen_rew, float), zeta)


def lagrange_update(eta, mean_cost_sums, bound, lr: float):
    """One projected descent step on the clipped constraint loss.

    The slack ``bound - J`` is clipped to (-inf, 0], so the multiplier grows
    by ``lr * violation`` when the constraint is violated and is otherwise
    left unchanged.
    """
    eta = np.asarray(eta, float)
    slack = np.asarray(bound, float) - np.asarray(mean_cost_sums, float)
    return np.maximum(0.0, eta - lr * np.minimum(slack, 0.0))


# -- losses -------------------------------------------------------------------

def ppo_loss_and_grad(policy: GaussianPolicy, obs, act, adv, logp_old, clip: float):
    """Clipped-surrogate objective (to maximize), its gradient, and approx KL."""
    logp, ctx = policy.log_prob(obs, act)
    ratio = np.exp(logp - logp_old)
    lo, hi = 1.0 - clip, 1.0 + clip
    clipped = np.clip(ratio, lo, hi)
    obj = np.minimum(ratio * adv, clipped * adv)
    # gradient flows only through the unclipped branch when it is the minimum
    active = np.where(adv >= 0, ratio <= hi, ratio >= lo)
    n = len(adv)
    g_logp = np.where(active, ratio * adv, 0.0) / n
    grads = policy.log_prob_backward(ctx, g_logp)
    kl = float(np.mean(logp_old - logp))
    return float(obj.mean()), grads, kl


def value_loss_and_grad(value: Mlp, obs, ret):
    v, cache = value.forward(obs)
    err = v[:, 0] - ret
    n = len(ret)
    grads, _ = value.backward(cache, (2.0 / n) * err[:, None])
    return float(np.mean(err * err)), grads


def average_grads(per_worker: list[list[np.ndarray]]) -> list[np.ndarray]:
    """Mean of worker gradients, reduced in worker-index order."""
    k = len(per_worker)
    out = [g.copy() for g in per_worker[0]]
    for grads in per_worker[1:]:
        for acc, g in zip(out, grads):
            acc += g
    for acc in out:
        acc /= k
    return out


# -- rollouts -----------------------------------------------------------------

def make_policy(cfg: RunConfig, rng: np.random.Generator) -> GaussianPolicy:
    t = cfg.trainer
    m = cfg.network.n_uavs
    bias = [t.init_climb_bias] * m + [0.0]
    return GaussianPolicy(cfg.obs_dim, cfg.act_dim, t.hidden, rng, t.init_log_std, bias)


def make_value(cfg: RunConfig, rng: np.random.Generator) -> Mlp:
    return Mlp((cfg.obs_dim, *cfg.trainer.hidden, 1), rng)


def rollout_batch(envs: list[UavNomaEnv], policy: GaussianPolicy, value: Mlp | None,
                  eta, rng: np.random.Generator | None, zeta: float = 0.999,
                  xi: float = 0.97, deterministic: bool = False) -> list[Trajectory]:
    """Run freshly reset environments in lockstep until their horizon.

    Actions for all environments come from one batched policy call per
    step. With ``deterministic`` the policy mean is used and ``rng`` may be
    None. Episodes are always run to the full horizon.
    """
    eta = np.asarray(eta, float)
    obs = np.stack([env.observation() for env in envs])
    e_n = len(envs)
    horizon = envs[0].cfg.env.horizon
    m = envs[0].cfg.network.n_uavs
    o_buf = np.empty((e_n, horizon, obs.shape[1]))
    a_buf = np.empty((e_n, horizon, policy.act_dim))
    lp_buf = np.zeros((e_n, horizon))
    r_buf = np.empty((e_n, horizon))
    c_buf = np.empty((e_n, horizon, m))
    cap = np.empty((e_n, horizon))
    for n in range(horizon):
        o_buf[:, n] = obs
        if deterministic:
            a_env = policy.mean(obs)
            a_pre = a_env
        else:
            a_env, a_pre, lp_buf[:, n] = policy.sample(obs, rng)
        a_buf[:, n] = a_pre
        for i, env in enumerate(envs):
            res = env.step(a_env[i])
            obs[i] = res.obs
            r_buf[i, n] = res.reward
            c_buf[i, n] = res.costs
            cap[i, n] = res.info["capacity_bps"]
    trajs = []
    for i, env in enumerate(envs):
        pen = penalized_reward(r_buf[i], c_buf[i], eta)
        val = value(o_buf[i])[:, 0] if value is not None else np.zeros(horizon)
        tr = Trajectory(o_buf[i], a_buf[i], lp_buf[i], r_buf[i], c_buf[i], pen, val)
        tr.adv = compute_gae(pen, val, zeta, xi)
        tr.ret = rewards_to_go(pen, zeta)
        tr.info = {"capacity": cap[i], "b0": env.b0.copy(), "b_final": env.b.copy()}
        trajs.append(tr)
    return trajs


def rollout(env: UavNomaEnv, policy: GaussianPolicy, value: Mlp | None, eta,
            rng: np.random.Generator | None, zeta: float = 0.999, xi: float = 0.97,
            deterministic: bool = False) -> Trajectory:
    """One episode from a freshly reset environment."""
    return rollout_batch([env], policy, value, eta, rng, zeta, xi, deterministic)[0]


def worker_seed(seed: int, epoch: int, worker: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, epoch, worker])


def run_worker(cfg: RunConfig, policy: GaussianPolicy, value: Mlp, eta, seed: int,
               epoch: int, worker: int, n_episodes: int) -> list[Trajectory]:
    """Episodes of one worker; it owns its environments and generators."""
    ss = worker_seed(seed, epoch, worker)
    children = ss.spawn(n_episodes + 1)
    envs = []
    for child in children[:n_episodes]:
        env = UavNomaEnv(cfg, np.random.default_rng(child))
        env.reset()
        envs.append(env)
    rng = np.random.default_rng(children[-1])
    t = cfg.trainer
    return rollout_batch(envs, policy, value, eta, rng, t.zeta, t.xi)


def _worker_entry(args):
    return run_worker(*args)


# -- training -----------------------------------------------------------------

LOG_HEADER_BASE = ["epoch", "mean_return"]


def log_header(m: int) -> list[str]:
    return (LOG_HEADER_BASE + [f"mean_cost_{k + 1}" for k in range(m)]
            + [f"eta_{k + 1}" for k in range(m)]
            + ["kl", "entropy", "policy_loss", "value_loss", "pi_steps"])


@dataclass
class TrainState:
    cfg: RunConfig
    policy: GaussianPolicy
    value: Mlp
    eta: np.ndarray
    pi_opt: Adam
    v_opt: Adam
    epoch: int = 0
    rows: list = field(default_factory=list)


def init_state(cfg: RunConfig) -> TrainState:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC0FFEE]))
    policy = make_policy(cfg, rng)
    value = make_value(cfg, rng)
    kind, etas = parse_mode(cfg.trainer.mode)
    eta = np.zeros(cfg.network.n_uavs) if etas is None else np.array(etas, float)
    t = cfg.trainer
    return TrainState(cfg, policy, value, eta, Adam(policy.params, t.pi_lr),
                      Adam(value.params, t.v_lr))


def _shards(trajs: list[Trajectory], workers: int):
    per = len(trajs) // workers
    out = []
    for k in range(workers):
        chunk = trajs[k * per:(k + 1) * per]
        out.append({
            "obs": np.concatenate([t.obs for t in chunk]),
            "act": np.concatenate([t.act for t in chunk]),
            "logp": np.concatenate([t.logp for t in chunk]),
            "adv": np.concatenate([t.adv for t in chunk]),
            "ret": np.concatenate([t.ret for t in chunk]),
        })
    return out


def ppo_update(state: TrainState, shards) -> dict:
    """Clipped-surrogate ascent with KL early stop; returns diagnostics."""
    t = state.cfg.trainer
    policy = state.policy
    kl = 0.0
    obj = 0.0
    steps = 0
    for _ in range(t.pi_iters):
        res = [ppo_loss_and_grad(policy, s["obs"], s["act"], s["adv"], s["logp"], t.clip_ratio)
               for s in shards]
        obj = float(np.mean([r[0] for r in res]))
        kl = float(np.mean([r[2] for r in res]))
        if not np.isfinite(obj):
            raise TrainingError(f"epoch {state.epoch}: non-finite policy objective")
        if kl >= t.kl_threshold:
            break
        state.pi_opt.step(average_grads([r[1] for r in res]), maximize=True)
        policy.touch()
        steps += 1
    else:
        # report the KL of the parameters actually kept
        res = [ppo_loss_and_grad(policy, s["obs"], s["act"], s["adv"], s["logp"], t.clip_ratio)
               for s in shards]
        obj = float(np.mean([r[0] for r in res]))
        kl = float(np.mean([r[2] for r in res]))
    return {"kl": kl, "policy_loss": -obj, "pi_steps": steps}


def value_update(state: TrainState, shards) -> float:
    """Adam descent on the squared error to rewards-to-go; returns the first loss."""
    first = None
    for _ in range(state.cfg.trainer.v_iters):
        res = [value_loss_and_grad(state.value, s["obs"], s["ret"]) for s in shards]
        loss = float(np.mean([r[0] for r in res]))
        if not np.isfinite(loss):
            raise TrainingError(f"epoch {state.epoch}: non-finite value loss")
        if first is None:
            first = loss
        state.v_opt.step(average_grads([r[1] for r in res]))
        state.value.touch()
    return 0.0 if first is None else first


def train_epoch(state: TrainState, pool: ProcessPoolExecutor | None = None,
                debug: bool = False) -> dict:
    cfg = state.cfg
    t = cfg.trainer
    kind, _ = parse_mode(t.mode)
    per_worker = t.episodes_per_epoch // t.workers
    args = [(cfg, state.policy, state.value, state.eta, cfg.seed, state.epoch, k, per_worker)
            for k in range(t.workers)]
    try:
        if pool is None:
            results = [run_worker(*a) for a in args]
        else:
            results = list(pool.map(_worker_entry, args))
    except Exception as exc:
        raise TrainingError(f"epoch {state.epoch}: worker failed: {exc}") from exc
    trajs = [tr for res in results for tr in res]

    if debug:
        for tr in trajs:
            full = compute_gae(tr.pen_rew, tr.val, t.zeta, 1.0)
            ref = rewards_to_go(tr.pen_rew, t.zeta) - tr.val
            assert np.allclose(full, ref, rtol=0, atol=1e-10), "GAE(xi=1) mismatch"

    all_adv = np.concatenate([tr.adv for tr in trajs])
    mu, sd = all_adv.mean(), all_adv.std()
    for tr in trajs:
        tr.adv = (tr.adv - mu) / (sd + 1e-8)
    shards = _shards(trajs, t.workers)

    pi_info = ppo_update(state, shards)
    v_loss = value_update(state, shards)

    cost_sums = np.array([tr.costs.sum(axis=0) for tr in trajs])
    mean_cost = cost_sums.mean(axis=0)
    if kind == "cdrl":
        state.eta = lagrange_update(state.eta, mean_cost, cfg.constraint_bound, t.eta_lr)

    row = {
        "epoch": state.epoch,
        "mean_return": float(np.mean([tr.rew.sum() for tr in trajs])),
        "mean_cost": mean_cost,
        "eta": state.eta.copy(),
        "kl": pi_info["kl"],
        "entropy": state.policy.entropy(),
        "policy_loss": pi_info["policy_loss"],
        "value_loss": v_loss,
        "pi_steps": pi_info["pi_steps"],
    }
    state.rows.append(row)
    state.epoch += 1
    return row


def row_to_csv(row: dict) -> list[str]:
    return ([str(row["epoch"]), repr(row["mean_return"])]
            + [repr(float(c)) for c in row["mean_cost"]]
            + [repr(float(e)) for e in row["eta"]]
            + [repr(row["kl"]), repr(row["entropy"]), repr(row["policy_loss"]),
               repr(row["value_loss"]), str(row["pi_steps"])])


def train(cfg: RunConfig, out_dir: str | Path | None = None, processes: int | None = None,
          debug: bool = False, progress: bool = False) -> TrainState:
    """Run all epochs; writes training_log.csv, timing.csv and final.ckpt to ``out_dir``.

    ``processes`` > 1 runs workers in a process pool (same results as in-process).
    On failure a partial checkpoint is written before the error propagates.
    """
    from uavnoma.checkpoint import save_checkpoint
    from uavnoma.config import save_config

    state = init_state(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_config(cfg, out / "config.json")
    if processes is None:
        processes = min(cfg.trainer.workers, os.cpu_count() or 1)
    pool = ProcessPoolExecutor(processes) if processes > 1 else None
    m = cfg.network.n_uavs
    log_fh = timing_fh = None
    try:
        if out is not None:
            log_fh = open(out / "training_log.csv", "w", newline="")
            timing_fh = open(out / "timing.csv", "w", newline="")
            log_w, time_w = csv.writer(log_fh), csv.writer(timing_fh)
            log_w.writerow(log_header(m))
            time_w.writerow(["epoch", "wall_ms"])
        for _ in range(cfg.trainer.epochs):
            t0 = time.perf_counter()
            row = train_epoch(state, pool, debug)
            wall_ms = (time.perf_counter() - t0) * 1e3
            if out is not None:
                log_w.writerow(row_to_csv(row))
                time_w.writerow([row["epoch"], f"{wall_ms:.1f}"])
                log_fh.flush()
            if progress:
                log.info("epoch %d return %.4f cost %s eta %s kl %.4f steps %d (%.0f ms)",
                         row["epoch"], row["mean_return"], np.round(row["mean_cost"], 4),
                         np.round(row["eta"], 4), row["kl"], row["pi_steps"], wall_ms)
    except Exception:
        if out is not None:
            save_checkpoint(state, out / "partial.ckpt")
        raise
    finally:
        if pool is not None:
            pool.shutdown()
        for fh in (log_fh, timing_fh):
            if fh is not None:
                fh.close()
    if out is not None:
        save_checkpoint(state, out / "final.ckpt")
    return state
