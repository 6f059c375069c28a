#!/usr/bin/env python3
"""Benchmark the numba-jitted hot loops against the pure-numpy fallbacks.

Run from the repository root:

    python benchmarks/bench_backends.py

Each kernel is timed on representative problem sizes after a JIT warmup, and
the two variants are checked to agree to 1e-12 relative.  Set
FHNSCALE_NUMBA=0 to confirm the package still works on the numpy path (this
script always times both variants directly, regardless of the flag).
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fhnscale import _kernels  # noqa: E402
from fhnscale.backend import NUMBA_ENABLED, backend_name  # noqa: E402


def timeit(fn, *args, repeat=5):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def check(a, b, label):
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-13, err_msg=label)


def main() -> int:
    rng = np.random.default_rng(42)
    print(f"dispatched backend: {backend_name()} (numba available: {NUMBA_ENABLED})")
    print(f"{'kernel':<28}{'size':>14}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}")

    cases = []

    samples = np.abs(rng.standard_normal(256))
    field = rng.standard_normal(256)
    cases.append(
        ("convolve_direct (1d)", "256 cells",
         lambda: _kernels.convolve_direct_numpy(samples, field, 0.03),
         lambda: _kernels.convolve_direct_jit(samples, field, 0.03))
    )

    samples2 = np.abs(rng.standard_normal((16, 16)))
    field2 = rng.standard_normal((16, 16))
    cases.append(
        ("convolve_direct (2d)", "16x16 cells",
         lambda: _kernels.convolve_direct_numpy(samples2, field2, 0.06),
         lambda: _kernels.convolve_direct_jit(samples2, field2, 0.06))
    )

    rho = np.abs(rng.standard_normal(256))
    cases.append(
        ("nonlocal_diff", "256 cells",
         lambda: _kernels.nonlocal_diff_numpy(samples, rho, field, 0.03),
         lambda: _kernels.nonlocal_diff_jit(samples, rho, field, 0.03))
    )
    cases.append(
        ("pair_energy", "256 cells",
         lambda: _kernels.pair_energy_numpy(samples, rho, field),
         lambda: _kernels.pair_energy_jit(samples, rho, field))
    )

    cell = rng.integers(0, 256, 200_000)
    values = rng.standard_normal(200_000)
    cases.append(
        ("bin_sums", "2e5 particles",
         lambda: _kernels.bin_sums_numpy(cell, values, 256),
         lambda: _kernels.bin_sums_jit(cell, values, 256))
    )

    n = 2000
    K = np.abs(rng.standard_normal((n, n)))
    K = 0.5 * (K + K.T)
    v = rng.standard_normal(n)
    cases.append(
        ("coupling_sum", f"n={n}",
         lambda: _kernels.coupling_sum_numpy(K, v),
         lambda: _kernels.coupling_sum_jit(K, v))
    )

    for name, size, np_fn, jit_fn in cases:
        jit_fn()  # warm the JIT cache before timing
        t_np, r_np = timeit(np_fn)
        t_jit, r_jit = timeit(jit_fn)
        check(r_np, r_jit, name)
        print(f"{name:<28}{size:>14}{t_np * 1e3:>12.3f}{t_jit * 1e3:>12.3f}{t_np / t_jit:>9.2f}x")

    print("all variant pairs agree to 1e-12 relative")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
