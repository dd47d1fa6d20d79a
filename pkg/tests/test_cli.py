import json

import pytest

from uavnoma.cli import main

TINY = {"n_devices": 10, "subslots": 10, "horizon": 6, "epochs": 1, "workers": 1,
        "episodes_per_epoch": 2, "hidden": [8, 8], "pi_iters": 2, "v_iters": 2}


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(TINY))
    return p


def test_train_eval_generalize_export(tmp_path, cfg_file, capsys):
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg_file), "--seed", "7", "--out", str(run)]) == 0
    assert (run / "final.ckpt").exists() and (run / "training_log.csv").exists()
    assert json.loads((run / "config.json").read_text())["seed"] == 7

    ev = tmp_path / "ev"
    assert main(["eval", "--config", str(cfg_file), "--seed", "7", "--checkpoint",
                 str(run / "final.ckpt"), "--episodes", "3", "--out", str(ev)]) == 0
    # the seed is excluded from the hash, so the same file validates
    rep = json.loads((ev / "eval_report.json").read_text())
    assert rep["rollouts"] == 3
    assert (ev / "trace_002.csv").exists()

    gen = tmp_path / "gen"
    assert main(["generalize", "--checkpoint", str(run / "final.ckpt"), "--episodes", "1",
                 "--out", str(gen)]) == 0
    res = json.loads((gen / "generalization.json").read_text())
    assert {"alt_all_min", "alt_all_max", "n_1000", "xy_corners", "xy_random"} <= set(res)

    assert main(["export-plots", str(run), "--episodes", "2"]) == 0
    plots = run / "plots"
    for name in ("training_curves.csv", "multipliers.csv", "altitude.csv", "battery_wh.csv",
                 "access_probability.csv"):
        assert (plots / name).read_text().startswith("series,x,value")


def test_train_flags_override(tmp_path, cfg_file):
    run = tmp_path / "r"
    assert main(["train", "--config", str(cfg_file), "--out", str(run), "--mode", "rlws:1,2",
                 "--epochs", "2", "--workers", "2"]) == 0
    saved = json.loads((run / "config.json").read_text())
    assert saved["mode"] == "rlws:1,2" and saved["epochs"] == 2 and saved["workers"] == 2
    assert len((run / "training_log.csv").read_text().splitlines()) == 3


def test_env_worker_override(tmp_path, cfg_file, monkeypatch):
    monkeypatch.setenv("CDRL_WORKERS", "2")
    run = tmp_path / "r"
    assert main(["baseline", "--config", str(cfg_file), "--out", str(run), "--kind",
                 "unconstrained"]) == 0
    saved = json.loads((run / "config.json").read_text())
    assert saved["workers"] == 2 and saved["mode"] == "ppo"


def test_hash_mismatch_needs_flag(tmp_path, cfg_file, capsys):
    run = tmp_path / "run"
    main(["train", "--config", str(cfg_file), "--out", str(run)])
    other = tmp_path / "o.json"
    other.write_text(json.dumps({**TINY, "n_devices": 12}))
    args = ["eval", "--config", str(other), "--checkpoint", str(run / "final.ckpt"),
            "--episodes", "1", "--out", str(tmp_path / "e"), "--no-traces"]
    assert main(args) == 1
    assert "hash" in capsys.readouterr().err
    assert main(args + ["--ignore-config-hash"]) == 0


def test_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code != 0
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus"])
    assert exc.value.code != 0
    assert "usage" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text('{"zeta": 1.5}')
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "zeta" in capsys.readouterr().err
    assert main(["train", "--mode", "sac", "--out", str(tmp_path / "y")]) == 1


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "uavnoma", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "export-plots" in res.stdout
