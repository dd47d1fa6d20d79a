"""Uplink p-persistent slotted Aloha with two-signal SIC at each UAV.

Fading is drawn once per slot for every device-UAV pair and held over the
slot's sub-slots. Interference at a UAV comes from every transmitting
device in the network, not only the devices it serves.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from uavnoma import _kernels
from uavnoma.config import NetworkConfig
from uavnoma.geometry import distance_3d


@dataclass(frozen=True)
class SnirStats:
    """Per-UAV decode statistics over the L sub-slots of one slot (linear SNIR)."""

    p_above_1: np.ndarray
    p_above_2: np.ndarray
    mean_1: np.ndarray
    mean_2: np.ndarray
    var_1: np.ndarray
    var_2: np.ndarray

    @classmethod
    def zeros(cls, m: int) -> "SnirStats":
        z = np.zeros(m)
        return cls(z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy())

    def as_matrix(self) -> np.ndarray:
        """(M, 6) array in field order."""
        return np.stack([self.p_above_1, self.p_above_2, self.mean_1,
                         self.mean_2, self.var_1, self.var_2], axis=1)


@dataclass(frozen=True)
class SlotOutcome:
    decode1: np.ndarray  # (M,) sub-slots with a first decode
    decode2: np.ndarray  # (M,) sub-slots with a second (SIC) decode
    capacity: float  # summed over sub-slots and UAVs
    snir: SnirStats
    subslots: int

    @property
    def mean_rate(self) -> float:
        """Average rate per sub-slot, in bit/s."""
        return self.capacity / self.subslots


def received_power(distance: float | np.ndarray, h: float | np.ndarray,
                   cfg: NetworkConfig, transmitting: bool | np.ndarray = True):
    """Received power in watts under log-distance path loss with fading ``h``."""
    d = np.maximum(np.asarray(distance, dtype=float), cfg.reference_distance)
    p = cfg.c0 * np.asarray(h, dtype=float) * cfg.tx_power_w * d ** (-cfg.path_loss_exponent)
    p = np.where(transmitting, p, 0.0)
    return float(p) if p.ndim == 0 else p


def top2_snir(rx_powers: Sequence[float], n0: float):
    """SNIR of the strongest and second-strongest signals at one UAV.

    ``rx_powers`` holds the powers of transmitting devices only; device ids
    are positions in that sequence. Returns ``(snir1, snir2, (id1, id2))``
    with ``None`` for signals that do not exist. Equal powers are ordered
    by id.
    """
    p = np.asarray(rx_powers, dtype=float)
    if p.size == 0:
        return None, None, (None, None)
    order = np.argsort(-p, kind="stable")
    total_rest = float(p[order[2:]].sum())
    if p.size == 1:
        return float(p[order[0]] / n0), None, (int(order[0]), None)
    p1, p2 = float(p[order[0]]), float(p[order[1]])
    s1 = p1 / (n0 + (p2 + total_rest))
    s2 = p2 / (n0 + total_rest)
    return s1, s2, (int(order[0]), int(order[1]))


def threshold(snir: float, snir_th: float) -> float:
    """Keep ``snir`` if it reaches the threshold (inclusive), else 0."""
    return snir if snir >= snir_th else 0.0


def subslot_rate(m: int, snir1, snir2, ids, owner: Sequence[int], snir_th: float,
                 bandwidth: float = 1.0) -> float:
    """Sum rate decoded at UAV ``m`` in one sub-slot."""
    id1, id2 = ids
    if snir1 is None or owner[id1] != m or snir1 < snir_th:
        # SIC cannot reach the second signal without the first decode
        return 0.0
    rate = bandwidth * math.log2(1.0 + snir1)
    if snir2 is None or owner[id2] != m:
        return rate
    return rate + bandwidth * math.log2(1.0 + threshold(snir2, snir_th))


def rx_matrix(devices: np.ndarray, uavs: np.ndarray, h: np.ndarray,
              cfg: NetworkConfig) -> np.ndarray:
    """(N, M) received powers for the given fading draw."""
    return received_power(distance_3d(devices, uavs), h, cfg)


def stats_from_sums(dec: np.ndarray, ssum: np.ndarray, ssq: np.ndarray,
                    subslots: int) -> SnirStats:
    cnt = dec.astype(float)
    safe = np.maximum(cnt, 1.0)
    mean = np.where(cnt > 0, ssum / safe, 0.0)
    var = np.where(cnt > 0, np.maximum(ssq / safe - mean * mean, 0.0), 0.0)
    prob = cnt / subslots
    return SnirStats(prob[:, 0], prob[:, 1], mean[:, 0], mean[:, 1], var[:, 0], var[:, 1])


def simulate_slot(devices: np.ndarray, uavs: np.ndarray, owner: np.ndarray, p: float,
                  cfg: NetworkConfig, rng: np.random.Generator,
                  fading: np.ndarray | None = None) -> SlotOutcome:
    """Run the L access sub-slots of one slot.

    Fading is exponential(1) per device-UAV pair unless ``fading`` is given.
    Each device transmits in each sub-slot independently with probability ``p``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"access probability {p} outside [0, 1]")
    n, m = len(devices), len(uavs)
    L = cfg.subslots
    h = rng.exponential(1.0, size=(n, m)) if fading is None else np.asarray(fading, float)
    rx = np.ascontiguousarray(rx_matrix(devices, uavs, h, cfg))
    tx = rng.random((L, n)) < p
    dec, ssum, ssq, cap = _kernels.decode_slot(
        rx, tx, np.ascontiguousarray(owner, dtype=np.int64),
        cfg.noise_w, cfg.snir_threshold_linear, cfg.bandwidth_hz)
    return SlotOutcome(
        decode1=dec[:, 0].copy(),
        decode2=dec[:, 1].copy(),
        capacity=float(cap),
        snir=stats_from_sums(dec, ssum, ssq, L),
        subslots=L,
    )


TRACE_FIELDS = ["slot", "uav", "decode1", "decode2", "capacity", "p_above_1",
                "p_above_2", "mean1", "mean2", "var1", "var2"]


def write_slot_trace(path: str | Path, outcomes: Sequence[SlotOutcome]) -> None:
    """Per-slot, per-UAV decode trace; ``capacity`` is the slot total."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for n, out in enumerate(outcomes):
            st = out.snir.as_matrix()
            for k in range(len(out.decode1)):
                w.writerow([n, k, int(out.decode1[k]), int(out.decode2[k]),
                            repr(out.capacity), *(repr(float(v)) for v in st[k])])
