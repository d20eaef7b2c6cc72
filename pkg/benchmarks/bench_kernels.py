#!/usr/bin/env python3
"""Compiled vs pure-numpy kernels on the two hot loops (ADMM and simplex).

The pure path calls each kernel's ``.py_func``, which is exactly what runs
under ROBUST_SYSID_DISABLE_JIT=1.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from robust_sysid import _kernels
from robust_sysid._accel import backend_name
from robust_sysid.estimator import SolverConfig, solve_lasso
from robust_sysid.experiments import ExperimentConfig, simulate_experiment_trial
from robust_sysid.lp import min_inf_norm_solve


def _admm_case():
    cfg = ExperimentConfig(n=5, horizon=120, trials=1)
    _, traj, _ = simulate_experiment_trial(cfg, 7)
    # tolerances nobody reaches: both paths run the full iteration budget
    solver = SolverConfig(max_iters=2000, tol_abs=1e-300, tol_rel=1e-300, polish=False)
    return lambda: solve_lasso(traj, solver)


def _simplex_case():
    rng = np.random.default_rng(3)
    basis = rng.standard_normal((8, 80))
    targets = rng.standard_normal((3, 8))
    return lambda: [min_inf_norm_solve(basis, t) for t in targets]


def _best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _pure(name):
    kernel = getattr(_kernels, name)
    return getattr(kernel, "py_func", kernel)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    print(f"active backend: {backend_name()}")
    cases = [("admm_sum_of_norms", _admm_case()), ("simplex_iterate", _simplex_case())]
    for name, fn in cases:
        fn()  # compile / warm caches
        jit_t = _best_time(fn, args.repeat)
        original = getattr(_kernels, name)
        setattr(_kernels, name, _pure(name))
        try:
            py_t = _best_time(fn, args.repeat)
        finally:
            setattr(_kernels, name, original)
        print(f"{name:20s} compiled {jit_t*1e3:9.2f} ms   pure {py_t*1e3:9.2f} ms   "
              f"speedup x{py_t / jit_t:6.1f}")


if __name__ == "__main__":
    main()
