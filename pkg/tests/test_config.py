import json
import math

import pytest

from uavnoma.config import (ConfigError, RunConfig, db_to_linear, dbm_to_watts, dumps_config,
                            from_dict, linear_to_db, load_config, parse_mode, save_config,
                            to_dict)


def test_empty_object_gives_table_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{}")
    cfg = load_config(p)
    net, e, t = cfg.network, cfg.energy, cfg.trainer
    assert net.tx_power_dbm == 30 and net.noise_dbm == -80 and net.snir_threshold_db == 10
    assert net.subslots == 1000 and net.n_devices == 200 and net.n_uavs == 2
    assert net.area == (0.0, 0.0, 1500.0, 500.0)
    assert (e.z_min, e.z_max, e.cloud_low, e.cloud_high) == (500, 1500, 700, 1300)
    assert (e.cloud_absorption, e.harvest_efficiency, e.panel_area, e.solar_intensity) == (
        0.01, 0.4, 1.0, 1367.0)
    assert (e.uav_weight, e.air_density, e.rotor_area, e.static_power, e.slot_seconds) == (
        39.2, 1.225, 0.18, 5.0, 10.0)
    assert (e.battery_max_wh, e.battery_min_wh) == (222.0, 22.0)
    assert (e.dz_min, e.dz_max) == (-40.0, 40.0)
    assert cfg.env.horizon == 360 and cfg.env.history == 5
    assert (t.zeta, t.xi, t.clip_ratio, t.kl_threshold) == (0.999, 0.97, 0.2, 0.01)
    assert (t.pi_lr, t.v_lr, t.eta_lr) == (3e-4, 1e-3, 3e-3)
    assert t.hidden == (128, 128, 128) and t.init_log_std == -0.5
    assert cfg == RunConfig()


def test_unit_conversions():
    assert dbm_to_watts(30) == pytest.approx(1.0)
    assert dbm_to_watts(-80) == pytest.approx(1e-11)
    assert db_to_linear(10) == pytest.approx(10.0)
    assert linear_to_db(100.0) == pytest.approx(20.0)
    cfg = RunConfig()
    assert cfg.energy.battery_max_j == pytest.approx(222 * 3600)
    assert cfg.network.c0 == pytest.approx((1 / 3 / (4 * math.pi)) ** 2)


@pytest.mark.parametrize("bad", [
    {"zeta": 1.5}, {"zeta": 0.0}, {"xi": -0.1}, {"n_devices": 1, "n_uavs": 2},
    {"clip_ratio": 0}, {"cloud_low": 1400}, {"battery_min_wh": 300}, {"dz_min": 5},
    {"subslots": 0}, {"horizon": 0}, {"episodes_per_epoch": 30, "workers": 4},
])
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        from_dict(bad)


def test_error_names_the_key(tmp_path):
    with pytest.raises(ConfigError, match="zeta"):
        from_dict({"zeta": 1.5})
    with pytest.raises(ConfigError, match="no_such_key"):
        from_dict({"no_such_key": 1})
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_round_trip_canonical(tmp_path):
    x = {"n_devices": 50, "subslots": 100, "seed": 3, "mode": "rlws:10,10",
         "initial_altitudes": [500, 1500], "hidden": [16, 16]}
    cfg = from_dict(x)
    canon = to_dict(cfg)
    assert to_dict(from_dict(json.loads(dumps_config(cfg)))) == canon
    p = tmp_path / "c.json"
    save_config(cfg, p)
    assert p.read_text() == dumps_config(load_config(p))
    assert load_config(p) == cfg


def test_hash_ignores_seed_and_output():
    a = RunConfig()
    assert a.hash() == a.replace(seed=9, out_dir="elsewhere").hash()
    assert a.hash() != a.replace(n_devices=100).hash()


def test_modes():
    assert parse_mode("cdrl") == ("cdrl", None)
    assert parse_mode("ppo") == ("ppo", None)
    assert parse_mode("ppo-unconstrained") == ("ppo", None)
    assert parse_mode("rlws:10,10") == ("rlws", (10.0, 10.0))
    for bad in ("rlws:-1,0", "rlws:a", "sac"):
        with pytest.raises(ConfigError):
            parse_mode(bad)
    with pytest.raises(ConfigError):
        from_dict({"mode": "rlws:1,2,3"})


def test_observation_width():
    assert RunConfig().obs_dim == 36
    assert RunConfig().act_dim == 3
    assert RunConfig().replace(history=0).obs_dim == 2 * 8
