"""Timing comparison of the numba and numpy kernel backends.

Runs each hot kernel on a representative workload under both backends and
prints a table of best-of-N wall times.  The first numba call per kernel is
a warmup so JIT compilation does not pollute the numbers.

Usage:
    python3 benchmarks/bench_backends.py [--paths N] [--steps K] [--repeat R]
"""

import argparse
import os
import time

import numpy as np

from hazardlab import backend, kernels, rng
from hazardlab.grid import uniform_grid


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def build_cases(n_paths, n_steps, seed=7):
    grid = uniform_grid(1.0, n_steps)
    z = rng.standard_normals(seed, rng.STREAM_DRIVER, 0, n_paths, n_steps)
    u = rng.uniforms(seed, rng.STREAM_BRIDGE, 0, n_paths, n_steps)
    e = rng.exponentials(seed, rng.STREAM_THRESHOLD, 0, n_paths)

    w = kernels.scaled_cumsum(z, grid.sqrt_dt)
    x = w - 0.5 * grid.times[None, :]
    cum = grid.times[None, :] * 1.0
    zmat = np.exp(-np.abs(x))
    da = np.diff(np.concatenate([np.zeros((n_paths, 1)), np.abs(x)], axis=1))
    da = np.abs(da)

    cases = [
        ("scaled_cumsum", lambda: kernels.scaled_cumsum(z, grid.sqrt_dt)),
        ("exp_drift", lambda: kernels.exp_drift(w, grid.times, 1.0)),
        ("running_max", lambda: kernels.running_max(x)),
        ("grid_records", lambda: kernels.grid_records(x)),
        ("bridge_sup", lambda: kernels.bridge_sup(x, u, grid.dt)),
        ("first_crossing", lambda: kernels.first_crossing(cum, e, grid.times)),
        ("last_zero", lambda: kernels.last_zero(w, u, grid.dt, n_steps, True)),
        ("hazard_quadrature", lambda: kernels.hazard_quadrature(da, zmat, 1e-12)),
    ]
    return cases


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    if not backend.HAS_NUMBA:
        raise SystemExit("numba not importable; nothing to compare")

    cases = build_cases(args.paths, args.steps)

    os.environ["HAZARD_LAB_BACKEND"] = "numba"
    backend.apply_thread_cap()
    for _, fn in cases:
        fn()  # JIT warmup

    rows = []
    for name, fn in cases:
        os.environ["HAZARD_LAB_BACKEND"] = "numba"
        t_nb = _best_of(fn, args.repeat)
        os.environ["HAZARD_LAB_BACKEND"] = "numpy"
        t_np = _best_of(fn, args.repeat)
        rows.append((name, t_nb, t_np, t_np / t_nb))

    print(f"paths={args.paths} steps={args.steps} repeat={args.repeat} "
          f"threads={os.environ.get('HAZARD_LAB_THREADS', 'default')}")
    print(f"{'kernel':<20}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}")
    for name, t_nb, t_np, ratio in rows:
        print(f"{name:<20}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{ratio:>8.1f}x")

    del os.environ["HAZARD_LAB_BACKEND"]


if __name__ == "__main__":
    main()
