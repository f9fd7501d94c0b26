"""Time the compiled kernels against the pure-Python fallback.

Run with ``python3 benchmarks/bench_kernels.py``. Prints the median time per
call for each kernel and backend, and the speed-up.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from flowcast import _fallback

try:
    from flowcast import _kernels
except ImportError:  # extension not built
    _kernels = None


def _hy_inputs(rng, n):
    keep_x = rng.random(n) > 0.2
    keep_y = rng.random(n) > 0.2
    t = np.arange(n, dtype=np.float64)
    x, y = rng.normal(size=n).cumsum(), rng.normal(size=n).cumsum()
    return (np.ascontiguousarray(t[keep_x]), np.ascontiguousarray(x[keep_x]),
            np.ascontiguousarray(t[keep_y]), np.ascontiguousarray(y[keep_y]),
            np.arange(-8, 9, dtype=np.float64))


def _enet_inputs(rng, n, p):
    X = rng.normal(size=(n, p))
    X = np.asfortranarray((X - X.mean(0)) / X.std(0))
    y = X[:, 0] * 2 - X[:, 1] + rng.normal(size=n)
    y -= y.mean()
    top = np.abs(X.T @ y).max() / (n * 0.5)
    return X, y, np.ones(n), np.geomspace(top, top * 1e-4, 100), 0.5


def _median_time(fn, repeat):
    return float(np.median(timeit.repeat(fn, number=1, repeat=repeat)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    cases = {
        "hy_contrast n=104, 17 lags": ("hy_contrast", _hy_inputs(rng, 104)),
        "hy_contrast n=520, 17 lags": ("hy_contrast", _hy_inputs(rng, 520)),
        "enet_path N=12 p=20, 100 lambdas": ("enet_path", _enet_inputs(rng, 12, 20)),
        "enet_path N=52 p=40, 100 lambdas": ("enet_path", _enet_inputs(rng, 52, 40)),
    }
    print(f"{'case':36s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speed-up':>9s}")
    for label, (name, inputs) in cases.items():
        py = _median_time(lambda: getattr(_fallback, name)(*inputs), args.repeat)
        if _kernels is None:
            print(f"{label:36s} {py * 1e3:12.3f} {'n/a':>14s} {'n/a':>9s}")
            continue
        cc = _median_time(lambda: getattr(_kernels, name)(*inputs), args.repeat)
        print(f"{label:36s} {py * 1e3:12.3f} {cc * 1e3:14.3f} {py / cc:8.1f}x")


if __name__ == "__main__":
    main()
