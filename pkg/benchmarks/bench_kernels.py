"""Benchmark the walk kernel: numba JIT vs the pure-numpy fallback.

Run directly; it re-invokes itself in a subprocess with
MULTIWAY_MC_NO_NUMBA=1 to time the fallback path on the same workload.

    python3 benchmarks/bench_kernels.py [--walks N] [--n N]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def workload(n, density, rho, walks, seed=2024):
    import multiway_mc as mw
    problem = mw.random_problem(n, density, rho, seed)
    p = mw.initial_distribution_from(problem.h)
    P = mw.build_hypermatrix(problem.H, 3)
    spec = mw.WalkSpec(epsilon=1e-8, max_steps=100_000, num_walks=walks,
                       seed=seed)
    # warm-up compiles the kernel so the timing below is steady-state
    warm = mw.WalkSpec(epsilon=1e-8, max_steps=100_000, num_walks=2, seed=seed)
    mw.run_walks(problem, P, p, warm)
    t0 = time.perf_counter()
    z, steps, _ = mw.run_walks(problem, P, p, spec)
    dt = time.perf_counter() - t0
    total_steps = int(steps.sum())
    return dt, total_steps, float(np.mean(z))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--walks", type=int, default=None)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--density", type=float, default=0.2)
    ap.add_argument("--rho", type=float, default=0.7)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    from multiway_mc.kernels import USE_NUMBA
    mode = "numba" if USE_NUMBA else "numpy"
    # the interpreted path is orders of magnitude slower; shrink its batch
    walks = args.walks or (200_000 if USE_NUMBA else 2_000)
    dt, total_steps, mean = workload(args.n, args.density, args.rho, walks)
    print(f"{mode:>6}: {walks:>8} walks, {total_steps:>10} steps in "
          f"{dt:8.3f}s  ({total_steps / dt / 1e6:8.2f} Msteps/s)  "
          f"mean={mean:.6f}")

    if not args.child and USE_NUMBA:
        env = dict(os.environ, MULTIWAY_MC_NO_NUMBA="1")
        subprocess.run(
            [sys.executable, __file__, "--child",
             "--n", str(args.n), "--density", str(args.density),
             "--rho", str(args.rho)]
            + (["--walks", str(args.walks)] if args.walks else []),
            env=env, check=True)


if __name__ == "__main__":
    main()
