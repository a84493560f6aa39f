"""Time the numba and numpy sample-path kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--packets N] [--repeat R]
"""
import argparse
import time

import numpy as np

from mecpaoi import _accel
from mecpaoi.distributions import Exponential, rng_stream
from mecpaoi.simulator.kernels import KERNELS


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--packets", type=int, default=10**6)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    n = args.packets
    T = Exponential(2.0).sample_array(rng_stream(1, 1), n + 1)
    C = Exponential(2.0).sample_array(rng_stream(1, 2), n)
    xi = np.full(n, 0.3)
    warm = n // 100

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    print(f"packets={n} repeat={args.repeat}")
    for disc in ("non_preemptive", "preemptive"):
        row = {}
        for be in backends:
            fn = KERNELS[(disc, be)]
            fn(T[:1001], C[:1000], xi[:1000], 10)  # compile / warm caches
            row[be] = best_of(fn, (T, C, xi, warm), args.repeat)
        line = "  ".join(f"{be}={t * 1e3:8.2f} ms" for be, t in row.items())
        if "numba" in row:
            line += f"  speedup={row['numpy'] / row['numba']:.2f}x"
        print(f"{disc:15s} {line}")


if __name__ == "__main__":
    main()
