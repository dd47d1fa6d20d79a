"""Device deployment, K-means UAV placement and nearest-UAV association."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from uavnoma.config import ConfigError

Area = tuple[float, float, float, float]


@dataclass(frozen=True)
class Association:
    owner: np.ndarray  # (N,) index of the serving UAV
    members: tuple[np.ndarray, ...]  # per-UAV device indices


def deploy_devices(n: int, area: Area, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` device positions uniformly over ``area = (x0, y0, x1, y1)``."""
    x0, y0, x1, y1 = area
    if n < 1:
        raise ConfigError("n_devices: must be >= 1")
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("area: must have positive width and height")
    return rng.uniform((x0, y0), (x1, y1), size=(n, 2))


def within_cluster_ss(points: np.ndarray, centroids: np.ndarray) -> float:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
    return float(d2.min(axis=1).sum())


def _lloyd(points, m, rng, max_iters, tol, trace):
    n = len(points)
    centroids = points[rng.choice(n, size=m, replace=False)].copy()
    wcss = np.inf
    for _ in range(max_iters):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
        labels = d2.argmin(axis=1)
        wcss = float(d2[np.arange(n), labels].sum())
        trace.append(wcss)
        new = centroids.copy()
        for k in range(m):
            sel = labels == k
            if sel.any():
                new[k] = points[sel].mean(axis=0)
            else:
                new[k] = points[rng.integers(n)]
        shift = np.sqrt(((new - centroids) ** 2).sum(-1)).max()
        centroids = new
        if shift < tol:
            break
    return centroids, within_cluster_ss(points, centroids)


def kmeans_xy(
    points: np.ndarray,
    m: int,
    rng: np.random.Generator,
    max_iters: int = 100,
    tol: float = 1e-3,
    history: list[float] | None = None,
    restarts: int = 1,
) -> np.ndarray:
    """Lloyd's algorithm on planar points; returns an (m, 2) centroid array.

    Initial centroids are ``m`` distinct points drawn uniformly. A cluster
    that empties out is re-seeded at a uniformly chosen point. With
    ``restarts`` > 1 the run with the lowest within-cluster sum of squares
    wins (first one on ties). If ``history`` is given, the winning run's
    sum of squares after every assignment step is appended to it.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    if not 1 <= m <= n:
        raise ConfigError(f"kmeans: need 1 <= m <= N, got m={m}, N={n}")
    if restarts < 1:
        raise ConfigError("kmeans: restarts must be >= 1")
    best, best_ss, best_trace = None, np.inf, []
    for _ in range(restarts):
        trace: list[float] = []
        c, ss = _lloyd(points, m, rng, max_iters, tol, trace)
        if ss < best_ss:
            best, best_ss, best_trace = c, ss, trace
    if history is not None:
        history.extend(best_trace)
    return best


def distance_3d(devices: np.ndarray, uavs: np.ndarray) -> np.ndarray:
    """Device-UAV distances. ``devices`` is (..., 2), ``uavs`` is (M, 3).

    Returns an array of shape devices.shape[:-1] + (M,).
    """
    devices = np.asarray(devices, dtype=float)
    uavs = np.asarray(uavs, dtype=float)
    dx = devices[..., None, 0] - uavs[:, 0]
    dy = devices[..., None, 1] - uavs[:, 1]
    return np.sqrt(dx * dx + dy * dy + uavs[:, 2] ** 2)


def associate(devices: np.ndarray, uavs: np.ndarray) -> Association:
    # argmin returns the first minimum, so ties go to the lowest UAV index
    owner = distance_3d(devices, uavs).argmin(axis=1)
    members = tuple(np.flatnonzero(owner == k) for k in range(len(uavs)))
    return Association(owner=owner, members=members)


def save_deployment(path: str | Path, devices: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["device_id", "x", "y"])
        for i, (x, y) in enumerate(devices):
            w.writerow([i, repr(float(x)), repr(float(y))])


def load_deployment(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty deployment file")
    rows.sort(key=lambda r: int(r["device_id"]))
    return np.array([[float(r["x"]), float(r["y"])] for r in rows])
