import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavnoma.config import EnergyConfig
from uavnoma.energy import (battery_step, cloud_attenuation, consumption_energy, flight_power,
                            harvest_energy, induced_velocity)

E = EnergyConfig()


def test_cloud_attenuation_values():
    assert cloud_attenuation(0.0, E) == 1.0
    assert cloud_attenuation(600.0, E) == pytest.approx(2.479e-3, rel=1e-3)
    assert cloud_attenuation(300.0, E) == pytest.approx(0.0498, rel=1e-3)


@pytest.mark.parametrize("z, expected", [(1400.0, 5468.0), (1000.0, 272.3), (600.0, 13.55)])
def test_harvest_three_regimes(z, expected):
    assert harvest_energy(z, z, E) == pytest.approx(expected, rel=1e-3)


def test_harvest_uses_midpoint():
    assert harvest_energy(980.0, 1020.0, E) == pytest.approx(harvest_energy(1000.0, 1000.0, E))


def test_hover_power_by_hand():
    # induced velocity sqrt(W / (2 rho A)) and the hover term, constants typed in
    vz = math.sqrt(39.2 / (2 * 1.225 * 0.18))
    assert induced_velocity(E) == pytest.approx(vz) and vz == pytest.approx(9.428, abs=1e-3)
    hover = 39.2 ** 2 / (math.sqrt(2) * 1.225 * 0.18) / (4 ** 0.25 * vz) + 5.0
    assert flight_power(0.0, E) == pytest.approx(hover)
    assert hover == pytest.approx(374.6, abs=0.05)


@pytest.mark.parametrize("dz, joules", [(0.0, 3746.0), (40.0, 5314.0), (-40.0, 2178.0)])
def test_cruise_energy(dz, joules):
    assert consumption_energy(1000.0, 1000.0 + dz, E) == pytest.approx(joules, rel=1e-3)


def test_climb_above_cloud_is_net_positive():
    assert harvest_energy(1400.0, 1440.0, E) - consumption_energy(1400.0, 1440.0, E) > 0


def test_consumption_floored_at_zero():
    from dataclasses import replace
    heavy_descent = replace(E, dz_min=-10_000.0)
    assert consumption_energy(10_000.0, 0.0, heavy_descent) == 0.0


def test_harvest_monotone_on_grid():
    z = np.linspace(500, 1500, 2001)
    h = harvest_energy(z, z, E)
    assert np.all(np.diff(h) >= 0)


@given(st.floats(1.0, 40.0))
def test_ascent_hover_descent_order(dz):
    up = consumption_energy(1000.0, 1000.0 + dz, E)
    hover = consumption_energy(1000.0, 1000.0, E)
    down = consumption_energy(1000.0, 1000.0 - dz, E)
    assert up > hover > down


def test_battery_clamps_and_examples(rng):
    bmax = E.battery_max_j
    assert battery_step(bmax, 1e6, 10.0, rng, E, noise=0.0) == bmax
    assert battery_step(1000.0, 0.0, 3746.0, rng, E, noise=0.0) == 0.0
    b0 = 0.5 * bmax
    assert b0 == pytest.approx(399_600)
    nxt = battery_step(b0, harvest_energy(600, 600, E), consumption_energy(600, 600, E), rng, E,
                       noise=0.0)
    assert nxt == pytest.approx(395_868, abs=1.0)


def test_battery_noise_variance():
    rng = np.random.default_rng(0)
    b = np.full(200_000, 100_000.0)
    out = battery_step(b, 0.0, 0.0, rng, E)
    assert np.var(out - b) == pytest.approx(500.0, rel=0.02)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1e5), st.floats(0.0, 1e5), st.integers(0, 1000))
def test_battery_in_range(frac, eh, ec, seed):
    out = battery_step(frac * E.battery_max_j, eh, ec, np.random.default_rng(seed), E)
    assert 0.0 <= out <= E.battery_max_j
