"""Benchmark the compiled filter-bank kernels against the NumPy fallback.

Usage:
    python benchmarks/bench_backends.py [--shape 256] [--repeats 5]

Times the multi-level wavelet round trip (the solver's hot loop) and one
full reconstruction at production size with each available backend, and
checks that both produce the same numbers.
"""

import argparse
import time

import numpy as np

import pvdamp
import pvdamp._kernels as kernels
from pvdamp.wavelet import dwt2, idwt2


def time_call(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def bench_wavelet(shape, levels, repeats):
    gen = np.random.default_rng(0)
    x = gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    rows = {}
    results = {}
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        dwt2(x, levels)  # warm-up (atom caches, allocation)
        rows[backend] = time_call(lambda: idwt2(dwt2(x, levels)), repeats)
        results[backend] = dwt2(x, levels).data
    return rows, results


def bench_solver(shape, repeats):
    phantom = pvdamp.make_phantom(shape, seed=0, kind="blobs_and_vessels")
    coils = pvdamp.simulate_sensitivities(shape, 8, seed=1, smoothness=3.0)
    density = pvdamp.make_density(shape, 5.0, calib=(24, 24), decay_exponent=6.5,
                                  p_min=0.015)
    mask = pvdamp.draw_mask(density, seed=2)
    y = pvdamp.acquire(phantom.x0, coils, mask, seed=3)
    cfg = pvdamp.SolverConfig(levels=4, max_iters=10, eps_stop=1e-9)
    rows = {}
    for backend in kernels.available_backends():
        kernels.set_backend(backend)
        rows[backend] = time_call(
            lambda: pvdamp.pvdamp(y, mask, density, coils, cfg=cfg), max(1, repeats // 2)
        )
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--shape", type=int, default=256)
    parser.add_argument("--levels", type=int, default=4)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    shape = (args.shape, args.shape)

    print(f"backends available: {kernels.available_backends()}")
    wave_rows, wave_results = bench_wavelet(shape, args.levels, args.repeats)
    print(f"\nwavelet round trip, {shape[0]}x{shape[1]}, {args.levels} levels (best of {args.repeats}):")
    for backend, seconds in wave_rows.items():
        print(f"  {backend:>8}: {1e3 * seconds:8.2f} ms")
    if len(wave_results) == 2:
        a, b = wave_results.values()
        print(f"  max |difference| between backends: {np.max(np.abs(a - b)):.2e}")
    if "numpy" in wave_rows and "compiled" in wave_rows:
        print(f"  speedup: {wave_rows['numpy'] / wave_rows['compiled']:.2f}x")

    solver_rows = bench_solver(shape, args.repeats)
    print(f"\nfull reconstruction, {shape[0]}x{shape[1]}, 8 coils, 10 iterations:")
    for backend, seconds in solver_rows.items():
        print(f"  {backend:>8}: {seconds:8.3f} s")
    if "numpy" in solver_rows and "compiled" in solver_rows:
        print(f"  speedup: {solver_rows['numpy'] / solver_rows['compiled']:.2f}x")


if __name__ == "__main__":
    main()
