"""Solar harvesting, vertical-flight consumption and battery dynamics (joules)."""

from __future__ import annotations

import math

import numpy as np

from uavnoma.config import EnergyConfig


def cloud_attenuation(d_cloud, cfg: EnergyConfig):
    return np.exp(-cfg.cloud_absorption * np.asarray(d_cloud, dtype=float))


def harvest_energy(z_from, z_to, cfg: EnergyConfig):
    """Solar energy collected over one slot, evaluated at the mid-slot altitude."""
    zbar = 0.5 * (np.asarray(z_from, dtype=float) + np.asarray(z_to, dtype=float))
    full = cfg.harvest_efficiency * cfg.panel_area * cfg.solar_intensity * cfg.slot_seconds
    depth = np.clip(cfg.cloud_high - zbar, 0.0, cfg.cloud_high - cfg.cloud_low)
    out = full * cloud_attenuation(depth, cfg)
    return float(out) if out.ndim == 0 else out


def induced_velocity(cfg: EnergyConfig) -> float:
    return math.sqrt(cfg.uav_weight / (2.0 * cfg.air_density * cfg.rotor_area))


def flight_power(v_z, cfg: EnergyConfig):
    """Propulsion plus static power in watts at vertical speed ``v_z`` (m/s)."""
    w = cfg.uav_weight
    hover = (w * w / (math.sqrt(2.0) * cfg.air_density * cfg.rotor_area)) / (
        4.0 ** 0.25 * induced_velocity(cfg))
    return hover + w * np.asarray(v_z, dtype=float) + cfg.static_power


def consumption_energy(z_from, z_to, cfg: EnergyConfig):
    """Energy spent moving from ``z_from`` to ``z_to`` in one slot, floored at 0."""
    v_z = (np.asarray(z_to, dtype=float) - np.asarray(z_from, dtype=float)) / cfg.slot_seconds
    out = np.maximum(flight_power(v_z, cfg) * cfg.slot_seconds, 0.0)
    return float(out) if out.ndim == 0 else out


def battery_step(b, e_harvest, e_consume, rng: np.random.Generator | None,
                 cfg: EnergyConfig, noise=None):
    """Next battery level, clamped to [0, B_max].

    Gaussian noise with variance ``battery_noise_var`` is drawn from ``rng``
    unless ``noise`` is passed explicitly.
    """
    b = np.asarray(b, dtype=float)
    if noise is None:
        sd = math.sqrt(cfg.battery_noise_var)
        noise = rng.normal(0.0, sd, size=b.shape) if sd > 0 else np.zeros(b.shape)
    out = np.minimum(np.maximum(b + e_harvest - e_consume + noise, 0.0), cfg.battery_max_j)
    return float(out) if out.ndim == 0 else out
