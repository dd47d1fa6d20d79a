import numpy as np
import pytest

from uavnoma.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from uavnoma.config import RunConfig
from uavnoma.trainer import train

CFG = RunConfig().replace(n_devices=10, subslots=10, horizon=5, epochs=2, workers=1,
                          episodes_per_epoch=1, hidden=[8, 8], pi_iters=3, v_iters=3)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    train(CFG, out)
    return out


def test_save_load_save_byte_identical(run_dir, tmp_path):
    st = load_checkpoint(run_dir / "final.ckpt")
    save_checkpoint(st, tmp_path / "again.ckpt")
    assert (tmp_path / "again.ckpt").read_bytes() == (run_dir / "final.ckpt").read_bytes()


def test_loaded_state_matches(run_dir):
    st = load_checkpoint(run_dir / "final.ckpt")
    assert st.epoch == 2 and st.cfg == CFG
    assert st.pi_opt.t > 0 and st.v_opt.t == 2 * 3


def test_resumed_training_continues_identically(tmp_path):
    full = train(CFG.replace(epochs=3), tmp_path / "full")
    train(CFG, tmp_path / "half")
    st = load_checkpoint(tmp_path / "half" / "final.ckpt")
    from uavnoma.trainer import train_epoch
    row = train_epoch(st)
    assert row["mean_return"] == full.rows[-1]["mean_return"]
    assert np.array_equal(row["eta"], full.rows[-1]["eta"])


def test_hash_mismatch_refused_unless_overridden(run_dir):
    other = CFG.replace(n_devices=20)
    with pytest.raises(CheckpointError, match="hash"):
        load_checkpoint(run_dir / "final.ckpt", other)
    st = load_checkpoint(run_dir / "final.ckpt", other, check_hash=False)
    assert st.cfg.network.n_devices == 20


def test_dimension_change_is_an_error(run_dir):
    with pytest.raises(CheckpointError, match="dimension"):
        load_checkpoint(run_dir / "final.ckpt", CFG.replace(history=3), check_hash=False)
    with pytest.raises(CheckpointError, match="dimension"):
        load_checkpoint(run_dir / "final.ckpt", CFG.replace(n_uavs=3, initial_altitudes=[
            750, 1250, 1000]), check_hash=False)


def test_corrupted_files(run_dir, tmp_path):
    text = (run_dir / "final.ckpt").read_text()
    bad = tmp_path / "bad.ckpt"
    bad.write_text(text[: len(text) // 2])
    with pytest.raises(CheckpointError, match="corrupted"):
        load_checkpoint(bad)
    bad.write_text('{"format": "something-else"}')
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    bad.write_text(text.replace('"value"', '"valve"'))
    with pytest.raises(CheckpointError, match="malformed"):
        load_checkpoint(bad)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_run_dir_is_self_contained(run_dir, tmp_path):
    from uavnoma.config import load_config
    cfg = load_config(run_dir / "config.json")
    train(cfg, tmp_path)
    assert (tmp_path / "training_log.csv").read_text() == (run_dir / "training_log.csv").read_text()
