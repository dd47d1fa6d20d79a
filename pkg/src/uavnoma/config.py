"""Run configuration: network, energy and trainer constants.

Every key lives in one flat JSON namespace, so a config file reads like a
plain parameter table. Powers are given in dBm, thresholds
in dB and battery sizes in Wh; the ``*_w`` / ``*_j`` / ``*_linear``
properties are the only place those are converted for the engine.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

JOULES_PER_WH = 3600.0


class ConfigError(ValueError):
    """Invalid configuration value or key."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class NetworkConfig:
    n_devices: int = 200
    n_uavs: int = 2
    area: tuple[float, float, float, float] = (0.0, 0.0, 1500.0, 500.0)
    tx_power_dbm: float = 30.0
    path_loss_exponent: float = 2.0
    carrier_hz: float = 900e6
    reference_distance: float = 1.0
    noise_dbm: float = -80.0
    snir_threshold_db: float = 10.0
    bandwidth_hz: float = 1.0
    subslots: int = 1000
    # "kmeans", "random" or an explicit list of planar (x, y) points, one per UAV
    uav_xy: Any = "kmeans"
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-3
    kmeans_restarts: int = 4
    initial_altitudes: tuple[float, ...] = (750.0, 1250.0)
    # the speed of light is rounded to 3e8 in the usual link-budget convention
    light_speed: float = 3e8

    @property
    def tx_power_w(self) -> float:
        return dbm_to_watts(self.tx_power_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    @property
    def snir_threshold_linear(self) -> float:
        return db_to_linear(self.snir_threshold_db)

    @property
    def wavelength(self) -> float:
        return self.light_speed / self.carrier_hz

    @property
    def c0(self) -> float:
        return (self.wavelength / (4.0 * math.pi)) ** self.path_loss_exponent

    @property
    def p_max(self) -> float:
        """Upper end of the access-probability action range, 2/N."""
        return min(1.0, 2.0 / self.n_devices)

    def validate(self) -> None:
        if self.n_devices < 1:
            raise ConfigError("n_devices: must be >= 1")
        if self.n_uavs < 1:
            raise ConfigError("n_uavs: must be >= 1")
        if self.n_devices < self.n_uavs:
            raise ConfigError("n_devices: must be >= n_uavs")
        x0, y0, x1, y1 = self.area
        if not (x1 > x0 and y1 > y0):
            raise ConfigError("area: must have positive width and height")
        for name in ("path_loss_exponent", "carrier_hz", "reference_distance",
                     "bandwidth_hz", "light_speed", "kmeans_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        if self.subslots < 1:
            raise ConfigError("subslots: must be >= 1")
        if self.kmeans_max_iters < 1:
            raise ConfigError("kmeans_max_iters: must be >= 1")
        if self.kmeans_restarts < 1:
            raise ConfigError("kmeans_restarts: must be >= 1")
        if len(self.initial_altitudes) != self.n_uavs:
            raise ConfigError("initial_altitudes: need one altitude per UAV")
        if isinstance(self.uav_xy, str):
            if self.uav_xy not in ("kmeans", "random"):
                raise ConfigError("uav_xy: expected 'kmeans', 'random' or a list of points")
        else:
            pts = list(self.uav_xy)
            if len(pts) != self.n_uavs or any(len(p) != 2 for p in pts):
                raise ConfigError("uav_xy: need one (x, y) point per UAV")


@dataclass(frozen=True)
class EnergyConfig:
    harvest_efficiency: float = 0.4
    panel_area: float = 1.0
    solar_intensity: float = 1367.0
    cloud_absorption: float = 0.01
    cloud_low: float = 700.0
    cloud_high: float = 1300.0
    uav_weight: float = 39.2
    air_density: float = 1.225
    rotor_area: float = 0.18
    static_power: float = 5.0
    slot_seconds: float = 10.0
    battery_max_wh: float = 222.0
    battery_min_wh: float = 22.0
    # joules^2; std ~22.4 J per slot
    battery_noise_var: float = 500.0
    initial_battery_frac: float = 0.5
    z_min: float = 500.0
    z_max: float = 1500.0
    dz_min: float = -40.0
    dz_max: float = 40.0

    @property
    def battery_max_j(self) -> float:
        return self.battery_max_wh * JOULES_PER_WH

    @property
    def battery_min_j(self) -> float:
        return self.battery_min_wh * JOULES_PER_WH

    def validate(self) -> None:
        if not self.cloud_low < self.cloud_high:
            raise ConfigError("cloud_low: must be below cloud_high")
        # equality is allowed: it is the documented infeasible stress case
        if not 0 <= self.battery_min_wh <= self.battery_max_wh:
            raise ConfigError("battery_min_wh: must lie in [0, battery_max_wh]")
        if not self.dz_min < 0 < self.dz_max:
            raise ConfigError("dz_min/dz_max: need dz_min < 0 < dz_max")
        if not self.z_min < self.z_max or self.z_min < 0:
            raise ConfigError("z_min/z_max: need 0 <= z_min < z_max")
        if not 0 <= self.initial_battery_frac <= 1:
            raise ConfigError("initial_battery_frac: must lie in [0, 1]")
        if self.battery_noise_var < 0:
            raise ConfigError("battery_noise_var: must be >= 0")
        for name in ("harvest_efficiency", "panel_area", "solar_intensity",
                     "uav_weight", "air_density", "rotor_area", "slot_seconds"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        if self.cloud_absorption < 0 or self.static_power < 0:
            raise ConfigError("cloud_absorption/static_power: must be >= 0")


@dataclass(frozen=True)
class EnvConfig:
    horizon: int = 360
    history: int = 5
    p_min: float = 1e-4

    def validate(self) -> None:
        if self.horizon < 1:
            raise ConfigError("horizon: must be >= 1")
        if self.history < 0:
            raise ConfigError("history: must be >= 0")
        if not 0 <= self.p_min <= 1:
            raise ConfigError("p_min: must lie in [0, 1]")


@dataclass(frozen=True)
class TrainerConfig:
    zeta: float = 0.999
    xi: float = 0.97
    clip_ratio: float = 0.2
    kl_threshold: float = 0.01
    epochs: int = 1000
    episodes_per_epoch: int = 32
    workers: int = 32
    pi_iters: int = 80
    v_iters: int = 80
    pi_lr: float = 3e-4
    v_lr: float = 1e-3
    eta_lr: float = 3e-3
    hidden: tuple[int, ...] = (128, 128, 128)
    init_log_std: float = -0.5
    # raw-action bias of the altitude outputs at init; > 0 starts with a climb
    init_climb_bias: float = 0.5
    # "cdrl", "ppo" or "rlws:<eta_1,...,eta_M>"
    mode: str = "cdrl"

    def validate(self) -> None:
        if not 0 < self.zeta <= 1:
            raise ConfigError("zeta: must lie in (0, 1]")
        if not 0 <= self.xi <= 1:
            raise ConfigError("xi: must lie in [0, 1]")
        if not self.clip_ratio > 0:
            raise ConfigError("clip_ratio: must be positive")
        if not self.kl_threshold > 0:
            raise ConfigError("kl_threshold: must be positive")
        for name in ("epochs", "episodes_per_epoch", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be >= 1")
        if self.pi_iters < 0 or self.v_iters < 0:
            raise ConfigError("pi_iters/v_iters: must be >= 0")
        if self.episodes_per_epoch % self.workers:
            raise ConfigError("episodes_per_epoch: must be a multiple of workers")
        for name in ("pi_lr", "v_lr"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name}: must be positive")
        if self.eta_lr < 0:
            raise ConfigError("eta_lr: must be >= 0")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError("hidden: need at least one positive layer width")
        parse_mode(self.mode)


def parse_mode(mode: str) -> tuple[str, tuple[float, ...] | None]:
    """Split a trainer mode string into (kind, frozen multipliers)."""
    if mode in ("cdrl", "ppo"):
        return mode, None
    if mode == "ppo-unconstrained":
        return "ppo", None
    if mode.startswith("rlws:"):
        try:
            etas = tuple(float(v) for v in mode[5:].split(","))
        except ValueError:
            raise ConfigError(f"mode: bad rlws multipliers in {mode!r}") from None
        if any(e < 0 or not math.isfinite(e) for e in etas):
            raise ConfigError("mode: rlws multipliers must be finite and >= 0")
        return "rlws", etas
    raise ConfigError(f"mode: expected cdrl, ppo, ppo-unconstrained or rlws:<etas>, got {mode!r}")


_SECTIONS = {
    "network": NetworkConfig,
    "energy": EnergyConfig,
    "env": EnvConfig,
    "trainer": TrainerConfig,
}


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    env: EnvConfig = field(default_factory=EnvConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    seed: int = 0
    out_dir: str = "run"

    def validate(self) -> "RunConfig":
        self.network.validate()
        self.energy.validate()
        self.env.validate()
        self.trainer.validate()
        lo, hi = self.energy.z_min, self.energy.z_max
        for z in self.network.initial_altitudes:
            if not lo <= z <= hi:
                raise ConfigError(f"initial_altitudes: {z} outside [{lo}, {hi}]")
        kind, etas = parse_mode(self.trainer.mode)
        if etas is not None and len(etas) != self.network.n_uavs:
            raise ConfigError("mode: rlws needs one multiplier per UAV")
        return self

    @property
    def obs_dim(self) -> int:
        return self.network.n_uavs * (2 * (self.env.history + 1) + 6)

    @property
    def act_dim(self) -> int:
        return self.network.n_uavs + 1

    @property
    def constraint_bound(self) -> float:
        """Normalized per-UAV cost bound, -B_min / B_max."""
        return -self.energy.battery_min_j / self.energy.battery_max_j

    def replace(self, **flat: Any) -> "RunConfig":
        """Return a copy with flat keys overridden (validated)."""
        data = to_dict(self)
        for key in flat:
            if key not in data:
                raise ConfigError(f"{key}: unknown config key")
        data.update(flat)
        return from_dict(data)

    def hash(self) -> str:
        """Hash of everything that shapes the model; N, seed and paths excluded."""
        data = to_dict(self)
        for key in ("seed", "out_dir"):
            data.pop(key)
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _section_keys() -> dict[str, str]:
    owner: dict[str, str] = {}
    for sec, cls in _SECTIONS.items():
        for f in fields(cls):
            owner[f.name] = sec
    return owner


_KEY_OWNER = _section_keys()


def _coerce(cls: type, name: str, value: Any) -> Any:
    default = next(f.default for f in fields(cls) if f.name == name)
    if name == "uav_xy":
        if isinstance(value, str):
            return value
        try:
            return tuple(tuple(float(c) for c in p) for p in value)
        except TypeError:
            raise ConfigError("uav_xy: expected 'kmeans' or a list of points") from None
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name}: expected a list")
        elem = type(default[0]) if default else float
        try:
            return tuple(elem(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: bad list element") from None
    if isinstance(default, bool) or isinstance(default, str):
        if not isinstance(value, type(default)):
            raise ConfigError(f"{name}: expected {type(default).__name__}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise ConfigError(f"{name}: expected an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number")
        if not math.isfinite(value):
            raise ConfigError(f"{name}: must be finite")
        return float(value)
    return value


def from_dict(data: dict[str, Any]) -> RunConfig:
    """Build a validated RunConfig from a flat mapping; missing keys take defaults."""
    if not isinstance(data, dict):
        raise ConfigError("<root>: expected a JSON object")
    parts: dict[str, dict[str, Any]] = {sec: {} for sec in _SECTIONS}
    top: dict[str, Any] = {}
    for key, value in data.items():
        if key == "seed":
            top["seed"] = _coerce(RunConfig, "seed", value)
        elif key == "out_dir":
            top["out_dir"] = _coerce(RunConfig, "out_dir", value)
        elif key in _KEY_OWNER:
            sec = _KEY_OWNER[key]
            parts[sec][key] = _coerce(_SECTIONS[sec], key, value)
        else:
            raise ConfigError(f"{key}: unknown config key")
    cfg = RunConfig(**{sec: _SECTIONS[sec](**kw) for sec, kw in parts.items()}, **top)
    return cfg.validate()


def _jsonable(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def to_dict(cfg: RunConfig) -> dict[str, Any]:
    """Flat, JSON-ready mapping of every key (the canonical form)."""
    out: dict[str, Any] = {}
    for sec in _SECTIONS:
        for key, value in dataclasses.asdict(getattr(cfg, sec)).items():
            out[key] = _jsonable(value)
    out["seed"] = cfg.seed
    out["out_dir"] = cfg.out_dir
    return dict(sorted(out.items()))


def dumps_config(cfg: RunConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read a JSON config file. ``None`` gives the all-defaults config."""
    if path is None:
        return RunConfig().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"<file>: cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return from_dict(data)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(cfg))
