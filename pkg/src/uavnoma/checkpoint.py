"""JSON checkpoints: named parameter tensors as nested lists, plus the run
config, its hash and the seed. Floats are written with ``repr`` so a
save/load/save cycle is byte-identical."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from uavnoma.config import RunConfig, from_dict, to_dict

FORMAT = "uavnoma-checkpoint/1"


class CheckpointError(ValueError):
    """Unreadable, corrupted or incompatible checkpoint."""


def _arr(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _opt(opt) -> dict:
    st = opt.state()
    return {"t": st["t"], "m": [_arr(a) for a in st["m"]], "v": [_arr(a) for a in st["v"]]}


def checkpoint_dict(state) -> dict:
    cfg = state.cfg
    return {
        "format": FORMAT,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "epoch": state.epoch,
        "config": to_dict(cfg),
        "eta": _arr(state.eta),
        "policy": {
            "mean_net": [_arr(p) for p in state.policy.mean_net.params],
            "log_std": _arr(state.policy.log_std),
        },
        "value": [_arr(p) for p in state.value.params],
        "pi_opt": _opt(state.pi_opt),
        "v_opt": _opt(state.v_opt),
    }


def save_checkpoint(state, path: str | Path) -> None:
    Path(path).write_text(json.dumps(checkpoint_dict(state), separators=(",", ":")) + "\n")


def load_checkpoint(path: str | Path, cfg: RunConfig | None = None,
                    check_hash: bool = True):
    """Rebuild a TrainState from ``path``.

    With ``cfg`` given, the networks are built for that config: the
    observation / action widths and hidden sizes must match the file, and
    unless ``check_hash`` is False the config hash must match too.
    """
    from uavnoma.trainer import init_state

    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read: {exc}") from None
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupted checkpoint (line {exc.lineno}: {exc.msg})") from None
    if not isinstance(data, dict) or data.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a {FORMAT} file")
    try:
        saved_cfg = from_dict(data["config"])
        if cfg is None:
            cfg = saved_cfg
        elif check_hash and cfg.hash() != data["config_hash"]:
            raise CheckpointError(
                f"{path}: config hash {data['config_hash']} does not match {cfg.hash()}; "
                "pass the override to load anyway")
        if (cfg.obs_dim, cfg.act_dim, cfg.trainer.hidden) != (
                saved_cfg.obs_dim, saved_cfg.act_dim, saved_cfg.trainer.hidden):
            raise CheckpointError(
                f"{path}: network dimensions differ (obs {saved_cfg.obs_dim} -> {cfg.obs_dim}, "
                f"act {saved_cfg.act_dim} -> {cfg.act_dim})")
        state = init_state(cfg)
        state.policy.mean_net.load(data["policy"]["mean_net"])
        state.policy.log_std[...] = np.asarray(data["policy"]["log_std"], float)
        state.value.load(data["value"])
        state.eta = np.asarray(data["eta"], float)
        state.pi_opt.load(data["pi_opt"])
        state.v_opt.load(data["v_opt"])
        state.epoch = int(data["epoch"])
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint: {exc}") from None
    return state
