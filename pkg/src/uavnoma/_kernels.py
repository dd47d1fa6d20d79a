"""Hot inner loops, compiled with numba when available.

Set ``UAVNOMA_NUMBA=0`` to force the pure-numpy implementations (useful for
debugging and for benchmarking the two paths against each other). Both
paths consume the same pre-drawn random numbers, so they agree on every
decode event; floating-point sums may differ in the last few ulps.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("UAVNOMA_NUMBA", "1") != "0"


def decode_slot_numpy(rx, tx, owner, n0, threshold, bandwidth):
    """Two-signal SIC decoding over the sub-slots of one slot.

    Parameters
    ----------
    rx : (N, M) float array
        Received power at each UAV from each device, if it transmits.
    tx : (L, N) bool array
        Transmission indicator per sub-slot and device.
    owner : (N,) int array
        Serving UAV of each device.

    Returns
    -------
    dec : (M, 2) int64 counts of first / second decodes
    ssum, ssq : (M, 2) float sums and squared sums of decoded SNIRs
    capacity : float, sum over sub-slots and UAVs of the decoded rate
    """
    L, N = tx.shape
    M = rx.shape[1]
    dec = np.zeros((M, 2), dtype=np.int64)
    ssum = np.zeros((M, 2))
    ssq = np.zeros((M, 2))
    if L == 0 or N == 0:
        return dec, ssum, ssq, 0.0
    key = np.where(tx[:, :, None], rx[None, :, :], -1.0)
    order = np.argsort(-key, axis=1, kind="stable")
    srt = np.take_along_axis(key, order, axis=1)
    ntx = tx.sum(axis=1)
    has1 = (ntx >= 1)[:, None]
    has2 = (ntx >= 2)[:, None]
    p1 = srt[:, 0, :]
    p2 = np.where(has2, srt[:, 1, :] if N > 1 else 0.0, 0.0)
    rest = np.where(srt[:, 2:, :] >= 0.0, srt[:, 2:, :], 0.0).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(has1, p1 / (n0 + (p2 + rest)), 0.0)
        s2 = np.where(has2, p2 / (n0 + rest), 0.0)
    uav = np.arange(M)[None, :]
    own1 = owner[order[:, 0, :]] == uav
    own2 = owner[order[:, 1, :]] == uav if N > 1 else np.zeros_like(own1)
    d1 = has1 & own1 & (s1 >= threshold)
    d2 = d1 & has2 & own2 & (s2 >= threshold)
    s1 = np.where(d1, s1, 0.0)
    s2 = np.where(d2, s2, 0.0)
    dec[:, 0] = d1.sum(axis=0)
    dec[:, 1] = d2.sum(axis=0)
    ssum[:, 0] = s1.sum(axis=0)
    ssum[:, 1] = s2.sum(axis=0)
    ssq[:, 0] = (s1 * s1).sum(axis=0)
    ssq[:, 1] = (s2 * s2).sum(axis=0)
    capacity = bandwidth * float(np.log2(1.0 + s1).sum() + np.log2(1.0 + s2).sum())
    return dec, ssum, ssq, capacity


def discount_cumsum_numpy(x, gamma):
    """y[n] = sum_k gamma^k x[n+k], computed back to front."""
    out = np.empty(len(x))
    acc = 0.0
    for n in range(len(x) - 1, -1, -1):
        acc = x[n] + gamma * acc
        out[n] = acc
    return out


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def decode_slot_jit(rx, tx, owner, n0, threshold, bandwidth):
        L, N = tx.shape
        M = rx.shape[1]
        dec = np.zeros((M, 2), dtype=np.int64)
        ssum = np.zeros((M, 2))
        ssq = np.zeros((M, 2))
        capacity = 0.0
        for l in range(L):
            for m in range(M):
                i1 = -1
                i2 = -1
                p1 = -1.0
                p2 = -1.0
                for i in range(N):
                    if tx[l, i]:
                        p = rx[i, m]
                        if p > p1:
                            i2 = i1
                            p2 = p1
                            i1 = i
                            p1 = p
                        elif p > p2:
                            i2 = i
                            p2 = p
                if i1 < 0:
                    continue
                rest = 0.0
                for i in range(N):
                    if tx[l, i] and i != i1 and i != i2:
                        rest += rx[i, m]
                if i2 < 0:
                    p2 = 0.0
                s1 = p1 / (n0 + (p2 + rest))
                if owner[i1] != m or s1 < threshold:
                    continue
                dec[m, 0] += 1
                ssum[m, 0] += s1
                ssq[m, 0] += s1 * s1
                capacity += bandwidth * np.log2(1.0 + s1)
                if i2 < 0 or owner[i2] != m:
                    continue
                s2 = p2 / (n0 + rest)
                if s2 < threshold:
                    continue
                dec[m, 1] += 1
                ssum[m, 1] += s2
                ssq[m, 1] += s2 * s2
                capacity += bandwidth * np.log2(1.0 + s2)
        return dec, ssum, ssq, capacity

    @numba.njit(cache=True)
    def discount_cumsum_jit(x, gamma):
        out = np.empty(x.shape[0])
        acc = 0.0
        for n in range(x.shape[0] - 1, -1, -1):
            acc = x[n] + gamma * acc
            out[n] = acc
        return out

else:  # pragma: no cover
    decode_slot_jit = decode_slot_numpy
    discount_cumsum_jit = discount_cumsum_numpy


def decode_slot(rx, tx, owner, n0, threshold, bandwidth):
    if USE_NUMBA:
        return decode_slot_jit(rx, tx, owner, float(n0), float(threshold), float(bandwidth))
    return decode_slot_numpy(rx, tx, owner, n0, threshold, bandwidth)


def discount_cumsum(x, gamma):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return discount_cumsum_jit(x, float(gamma))
    return discount_cumsum_numpy(x, gamma)
