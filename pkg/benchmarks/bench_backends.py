#!/usr/bin/env python3
"""Benchmark the numba trajectory kernels against the pure-numpy fallback.

Times full coupled trajectories for representative configurations of each
preset and prints per-run wall time for both backends, their agreement and
the speedup.  The first numba call per coefficient pair includes JIT
compilation; it is timed separately and excluded from the steady-state
numbers.

Usage: python benchmarks/bench_backends.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from spdeint import MasterPath, SchemeConfig, preset, run_scheme

CASES = [
    # (problem, scheme, n, m_power)
    ("reacdiff1d", "milstein", 64, 2),
    ("reacdiff1d", "implicit_euler", 16, 3),
    ("reacdiff_cos", "milstein", 32, 2),
    ("heat2d", "milstein", 32, 2),
    ("heat2d", "splitting", 32, 2),
    ("burgers", "exponential_euler", 32, 3),
]


def time_run(cfg, backend, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = run_scheme(cfg, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    header = f"{'case':<36}{'compile':>9}{'numba':>10}{'numpy':>10}{'speedup':>9}{'max|diff|':>11}"
    print(header)
    print("-" * len(header))
    for name, scheme, n, m_power in CASES:
        prob = preset(name)
        m = n**m_power
        spec = prob.noise_spec(n)
        path = MasterPath(seed=1, steps=m, n_modes=spec.n_active, horizon=prob.horizon)
        cfg = SchemeConfig(scheme, prob, n, m, n, path)
        t0 = time.perf_counter()
        first = run_scheme(cfg, backend="numba")
        compile_s = time.perf_counter() - t0
        t_nb, r_nb = time_run(cfg, "numba", args.repeats)
        t_np, r_np = time_run(cfg, "numpy", args.repeats)
        diff = float(np.max(np.abs(r_nb.final.spectral - r_np.final.spectral)))
        label = f"{name}/{scheme} N={n} M={m}"
        print(f"{label:<36}{compile_s:>8.2f}s{t_nb:>9.4f}s{t_np:>9.4f}s{t_np / t_nb:>8.1f}x{diff:>11.1e}")
        assert np.allclose(first.final.spectral, r_nb.final.spectral)


if __name__ == "__main__":
    main()
