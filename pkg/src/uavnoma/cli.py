"""Command-line entry point: ``uavnoma <command> [options]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from uavnoma.checkpoint import CheckpointError, load_checkpoint
from uavnoma.config import ConfigError, RunConfig, load_config, parse_mode

log = logging.getLogger("uavnoma")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config; missing keys take defaults")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=Path, help="output directory")


def _train_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--workers", type=int, help="logical workers (also CDRL_WORKERS)")
    p.add_argument("--processes", type=int,
                   help="OS processes for rollouts (default: min(workers, cpus))")
    p.add_argument("--debug", action="store_true", help="enable internal consistency checks")


def _eval_opts(p: argparse.ArgumentParser, checkpoint_required: bool = True) -> None:
    p.add_argument("--checkpoint", type=Path, required=checkpoint_required)
    p.add_argument("--episodes", type=int, default=32)
    p.add_argument("--ignore-config-hash", action="store_true",
                   help="load a checkpoint trained under a different config")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavnoma",
                                 description="Energy-constrained multi-UAV NOMA access control")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a CDRL / PPO / RLWS agent")
    _common(p)
    _train_opts(p)
    p.add_argument("--mode", help="cdrl | ppo | rlws:<eta1,eta2,...>")

    p = sub.add_parser("baseline", help="train a fixed-multiplier baseline")
    _common(p)
    _train_opts(p)
    p.add_argument("--kind", default="unconstrained",
                   help="unconstrained | rlws:<eta1,eta2,...>")

    p = sub.add_parser("eval", help="evaluate a checkpoint with the deterministic policy")
    _common(p)
    _eval_opts(p)
    p.add_argument("--no-traces", action="store_true", help="skip per-rollout trace CSVs")

    p = sub.add_parser("generalize", help="evaluate a checkpoint across scales and placements")
    _common(p)
    _eval_opts(p)

    p = sub.add_parser("export-plots", help="long-format CSVs from a run directory")
    p.add_argument("run_dir", type=Path)
    _common(p)
    p.add_argument("--episodes", type=int, default=32)
    return ap


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["out_dir"] = str(args.out)
    env_workers = os.environ.get("CDRL_WORKERS")
    if env_workers:
        try:
            over["workers"] = int(env_workers)
        except ValueError:
            raise ConfigError(f"CDRL_WORKERS: not an integer: {env_workers!r}") from None
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    if getattr(args, "epochs", None) is not None:
        over["epochs"] = args.epochs
    if getattr(args, "mode", None) is not None:
        parse_mode(args.mode)
        over["mode"] = args.mode
    return cfg.replace(**over) if over else cfg


def _out(args, cfg: RunConfig, default: str) -> Path:
    return Path(args.out or cfg.out_dir or default)


def cmd_train(args) -> int:
    from uavnoma.trainer import train

    cfg = _load_cfg(args)
    out = _out(args, cfg, "run")
    train(cfg, out, processes=args.processes, debug=args.debug, progress=True)
    print(f"wrote {out / 'final.ckpt'} and {out / 'training_log.csv'}")
    return 0


def cmd_baseline(args) -> int:
    from uavnoma.evaluation import run_baseline

    cfg = _load_cfg(args)
    out = _out(args, cfg, "baseline")
    run_baseline(args.kind, cfg, out_dir=out, processes=args.processes, debug=args.debug,
                 progress=True)
    print(f"wrote {out / 'final.ckpt'} and {out / 'training_log.csv'}")
    return 0


def _policy(args, cfg: RunConfig):
    state = load_checkpoint(args.checkpoint, cfg if args.config else None,
                            check_hash=not args.ignore_config_hash)
    return state.policy, (cfg if args.config else state.cfg)


def cmd_eval(args) -> int:
    from uavnoma.evaluation import evaluate, write_report

    cfg = _load_cfg(args)
    policy, cfg = _policy(args, cfg)
    seed = args.seed if args.seed is not None else cfg.seed
    rep = evaluate(policy, cfg, args.episodes, seed, record=not args.no_traces)
    out = _out(args, cfg, str(args.checkpoint.parent / "eval"))
    write_report(rep, out, traces=not args.no_traces)
    print(json.dumps(rep.summary(), indent=2))
    return 0


def cmd_generalize(args) -> int:
    from uavnoma.evaluation import generalization_suite

    cfg = _load_cfg(args)
    policy, cfg = _policy(args, cfg)
    seed = args.seed if args.seed is not None else cfg.seed
    res = generalization_suite(policy, cfg, args.episodes, seed)
    out = _out(args, cfg, str(args.checkpoint.parent / "generalize"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "generalization.json").write_text(json.dumps(res, indent=2) + "\n")
    for name, s in res.items():
        print(f"{name:12s} capacity {s['capacity_bps_mean']:.4f} +- {s['capacity_bps_ci95']:.4f}"
              f"  G_t>0 {s['g_t_positive_fraction']:.2f}")
    return 0


def cmd_export_plots(args) -> int:
    from uavnoma.evaluation import evaluate, write_long_csv

    run = args.run_dir
    log_path = run / "training_log.csv"
    if not log_path.exists():
        raise FileNotFoundError(f"{log_path}: no training log")
    out = args.out or run / "plots"
    out.mkdir(parents=True, exist_ok=True)
    with open(log_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    curves, etas = [], []
    for r in rows:
        ep = int(r["epoch"])
        for k, v in r.items():
            if k.startswith("eta_"):
                etas.append((k, ep, v))
            elif k not in ("epoch", "pi_steps"):
                curves.append((k, ep, v))
    write_long_csv(out / "training_curves.csv", curves)
    write_long_csv(out / "multipliers.csv", etas)
    ckpt = run / "final.ckpt"
    if ckpt.exists():
        state = load_checkpoint(ckpt)
        cfg = state.cfg
        seed = args.seed if args.seed is not None else cfg.seed
        rep = evaluate(state.policy, cfg, args.episodes, seed)
        alt, bat, pac = [], [], []
        for i in range(rep.altitude.shape[0]):
            for n in range(rep.altitude.shape[1]):
                for m in range(rep.altitude.shape[2]):
                    alt.append((f"rollout{i}_uav{m + 1}", n, rep.altitude[i, n, m]))
                    bat.append((f"rollout{i}_uav{m + 1}", n, rep.battery[i, n, m] / 3600.0))
                pac.append((f"rollout{i}", n, rep.p_access[i, n]))
        write_long_csv(out / "altitude.csv", alt)
        write_long_csv(out / "battery_wh.csv", bat)
        write_long_csv(out / "access_probability.csv", pac)
    print(f"wrote plot data to {out}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "baseline": cmd_baseline,
    "eval": cmd_eval,
    "generalize": cmd_generalize,
    "export-plots": cmd_export_plots,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"uavnoma: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
