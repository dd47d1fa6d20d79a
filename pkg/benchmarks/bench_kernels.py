"""Compare the numba and numpy paths of the hot kernels.

    python benchmarks/bench_kernels.py [--repeat 20]

Both implementations are imported directly, so the env flag does not
matter here. Results must agree before timings are reported.
"""

import argparse
import time

import numpy as np

from uavnoma import _kernels as K
from uavnoma.channel import rx_matrix
from uavnoma.config import RunConfig


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def slot_inputs(n, l, p, rng):
    cfg = RunConfig()
    ch = cfg.network
    x0, y0, x1, y1 = cfg.network.area
    dev = np.column_stack([rng.uniform(x0, x1, n), rng.uniform(y0, y1, n), np.zeros(n)])
    uav = np.array([[x0 + 0.25 * (x1 - x0), y0 + 0.5 * (y1 - y0), 1000.0],
                    [x0 + 0.75 * (x1 - x0), y0 + 0.5 * (y1 - y0), 1500.0]])
    owner = np.argmin(((dev[:, None, :2] - uav[None, :, :2]) ** 2).sum(-1), axis=1)
    rx = rx_matrix(dev, uav, rng.exponential(1.0, (n, 2)), ch)
    tx = rng.random((l, n)) < p
    return rx, tx, owner, ch.noise_w, ch.snir_threshold_linear, ch.bandwidth_hz


def main():
    if not K._HAVE_NUMBA:
        raise SystemExit("numba is not installed")
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    print(f"{'kernel':28s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for n, l in ((50, 100), (200, 1000), (1000, 1000)):
        a = slot_inputs(n, l, 1.0 / n, rng)
        ref, jit = K.decode_slot_numpy(*a), K.decode_slot_jit(*a)  # also compiles
        assert all(np.allclose(u, v, rtol=1e-12) for u, v in zip(ref, jit))
        t_np = _best(lambda: K.decode_slot_numpy(*a), args.repeat)
        t_nb = _best(lambda: K.decode_slot_jit(*a), args.repeat)
        print(f"{f'decode_slot N={n} L={l}':28s} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} "
              f"{t_np / t_nb:8.1f}")

    for h in (120, 360, 4096):
        x = rng.normal(size=h)
        assert np.allclose(K.discount_cumsum_numpy(x, 0.99), K.discount_cumsum_jit(x, 0.99))
        t_np = _best(lambda: K.discount_cumsum_numpy(x, 0.99), args.repeat)
        t_nb = _best(lambda: K.discount_cumsum_jit(x, 0.99), args.repeat)
        print(f"{f'discount_cumsum len={h}':28s} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} "
              f"{t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
