import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavnoma.config import ConfigError
from uavnoma.geometry import (associate, deploy_devices, distance_3d, kmeans_xy,
                              load_deployment, save_deployment, within_cluster_ss)

AREA = (0.0, 0.0, 1500.0, 500.0)


def test_deploy_inside_area_and_reproducible():
    pts = deploy_devices(200, AREA, np.random.default_rng(1))
    assert pts.shape == (200, 2)
    assert np.all((pts[:, 0] >= 0) & (pts[:, 0] <= 1500) & (pts[:, 1] >= 0) & (pts[:, 1] <= 500))
    assert np.array_equal(pts, deploy_devices(200, AREA, np.random.default_rng(1)))


def test_deploy_errors():
    with pytest.raises(ConfigError):
        deploy_devices(1, (0.0, 0.0, 0.0, 0.0), np.random.default_rng(0))
    with pytest.raises(ConfigError):
        deploy_devices(0, AREA, np.random.default_rng(0))


def test_deploy_mean_large_sample():
    pts = deploy_devices(100_000, AREA, np.random.default_rng(2))
    assert np.all(np.abs(pts.mean(axis=0) - [750, 250]) < 5)


def test_kmeans_small_cases():
    c = kmeans_xy(np.array([[0.0, 0.0], [2.0, 0.0]]), 1, np.random.default_rng(0), 100, 1e-9)
    assert np.allclose(c, [[1.0, 0.0]])
    pts = np.array([[0.0, 0], [0, 2], [10, 0], [10, 2]])
    c = kmeans_xy(pts, 2, np.random.default_rng(0), 100, 1e-9, restarts=10)
    assert np.allclose(sorted(map(tuple, c)), [(0, 1), (10, 1)])


def _best_two_partition(pts):
    # exhaustive oracle over all 2-partitions
    n = len(pts)
    best = np.inf
    for mask in range(1, 2 ** (n - 1)):
        sel = np.array([(mask >> i) & 1 for i in range(n)], bool)
        ss = sum(((pts[s] - pts[s].mean(0)) ** 2).sum() for s in (sel, ~sel))
        best = min(best, ss)
    return best


def test_kmeans_matches_exhaustive_on_separated_clusters():
    pts = np.array([[0.0, 0], [0, 2], [1, 1], [10, 0], [10, 2], [11, 1]])
    c = kmeans_xy(pts, 2, np.random.default_rng(3), 100, 1e-9, restarts=10)
    assert within_cluster_ss(pts, c) == pytest.approx(_best_two_partition(pts))


def test_kmeans_uniform_rectangle_halves():
    pts = deploy_devices(100_000, AREA, np.random.default_rng(4))
    c = kmeans_xy(pts, 2, np.random.default_rng(5), 300, 1e-6)
    c = c[np.argsort(c[:, 0])]
    assert np.all(np.abs(c - [[375, 250], [1125, 250]]) < 10)


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_kmeans_wcss_non_increasing(seed, m):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 100, size=(40, 2))
    hist = []
    kmeans_xy(pts, m, rng, 50, 0.0, history=hist, restarts=3)
    assert all(b <= a + 1e-9 * max(1.0, a) for a, b in zip(hist, hist[1:]))


def test_kmeans_empty_cluster_reseeded():
    # duplicate points force an empty cluster when two centroids coincide
    pts = np.array([[0.0, 0.0]] * 5 + [[10.0, 0.0]])
    c = kmeans_xy(pts, 3, np.random.default_rng(0), 20, 1e-9)
    assert c.shape == (3, 2) and np.all(np.isfinite(c))


def test_distance_examples():
    assert distance_3d(np.array([0.0, 0.0]), np.array([[0.0, 0.0, 500.0]]))[0] == 500
    assert distance_3d(np.array([3.0, 0.0]), np.array([[0.0, 4.0, 0.0]]))[0] == pytest.approx(5)
    assert distance_3d(np.array([250.0, 250.0]), np.array([[250.0, 250.0, 750.0]]))[0] == 750


def test_association_examples():
    devs = deploy_devices(200, AREA, np.random.default_rng(6))
    a = associate(devs, np.array([[100.0, 100.0, 900.0]]))
    assert np.all(a.owner == 0)
    a = associate(devs, np.array([[0.0, 0.0, 500.0], [0.0, 0.0, 1500.0]]))
    assert np.all(a.owner == 0)
    a = associate(devs, np.array([[250.0, 250.0, 1500.0], [750.0, 250.0, 500.0]]))
    brute = [int(np.argmin([np.hypot(np.hypot(x - 250, y - 250), 1500),
                            np.hypot(np.hypot(x - 750, y - 250), 500)])) for x, y in devs]
    assert a.owner.tolist() == brute
    assert (a.owner == 1).sum() > 100


def test_association_tie_goes_to_lowest_index():
    a = associate(np.array([[5.0, 0.0]]), np.array([[0.0, 0.0, 10.0], [10.0, 0.0, 10.0]]))
    assert a.owner[0] == 0


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_association_partitions(seed, m):
    rng = np.random.default_rng(seed)
    devs = rng.uniform(0, 100, (30, 2))
    uavs = np.column_stack([rng.uniform(0, 100, (m, 2)), rng.uniform(500, 1500, m)])
    a = associate(devs, uavs)
    allm = np.sort(np.concatenate(a.members))
    assert np.array_equal(allm, np.arange(30))
    d = distance_3d(devs, uavs)
    assert np.all(d[np.arange(30), a.owner] <= d.min(axis=1))


@given(st.floats(0, 1000), st.floats(0, 1000))
def test_lower_uav_owns_everything_when_stacked(z1, dz):
    devs = np.random.default_rng(0).uniform(0, 100, (20, 2))
    uavs = np.array([[50.0, 50.0, z1 + dz + 1.0], [50.0, 50.0, z1]])
    assert np.all(associate(devs, uavs).owner == 1)


def test_deployment_csv_round_trip(tmp_path):
    devs = deploy_devices(17, AREA, np.random.default_rng(7))
    p = tmp_path / "d.csv"
    save_deployment(p, devs)
    assert p.read_text().splitlines()[0] == "device_id,x,y"
    assert np.array_equal(load_deployment(p), devs)


def test_kmeans_restarts_pick_lowest_wcss():
    pts = np.array([[0.0, 0], [0, 2], [10, 0], [10, 2]])
    for seed in range(20):
        c = kmeans_xy(pts, 2, np.random.default_rng(seed), 100, 1e-9, restarts=10)
        assert within_cluster_ss(pts, c) == pytest.approx(4.0)
