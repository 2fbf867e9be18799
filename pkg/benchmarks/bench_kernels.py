"""Time the compiled kernels against their pure-Python twins.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so this runs regardless of
LYMDO_PURE_PYTHON. Without a built extension only the Python column prints.
"""
import argparse
import timeit

import numpy as np

from lymdo._core import _pykernels

try:
    from lymdo._core import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    n = 5
    weights = rng.uniform(10.0, 20.0, n).tolist()
    bits = (8.0 * rng.uniform(1e4, 8e5, n)).tolist()
    snrs = rng.uniform(5.0, 400.0, n).tolist()
    arrivals = np.cumsum(rng.exponential(1.0 / 0.7, 100_000))
    d, lam = 2.2e8, 2.0
    return {
        "bandwidth_kkt (5 UEs)": lambda k: k.bandwidth_kkt(weights, bits, snrs, 5e6, 1e-9, 1e-13),
        "fibonacci_local_cpu": lambda k: k.fibonacci_local_cpu(30.0, 1e-28, d, lam, 10.0,
                                                               d * lam * (1 + 1e-6), 1.5e9, 1.5e3),
        "md1_mean_sojourn (1e5 tasks)": lambda k: k.md1_mean_sojourn(arrivals, 1.0),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        row = []
        for mod in (_pykernels, _ckernels):
            if mod is None:
                row.append(None)
                continue
            timer = timeit.Timer(lambda: fn(mod))
            number, _ = timer.autorange()
            row.append(min(timer.repeat(args.repeat, number)) / number)
        py, cy = row
        cy_txt = f"{cy * 1e6:10.1f}us" if cy else "         n/a"
        ratio = f"{py / cy:7.1f}x" if cy else "     n/a"
        print(f"{name:32s} {py * 1e6:10.1f}us {cy_txt} {ratio}")


if __name__ == "__main__":
    main()
