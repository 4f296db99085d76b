"""Benchmark the compiled kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--holds N] [--steps N]

Covers the two hot loops: the sampled modal advance (many short holds,
as in certified-period runs) and the theta-scheme stepper of the
reference solver.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from zohpde._backend import get_backends


def bench_modal(impl, n_holds: int, n_modes: int = 64) -> float:
    rng = np.random.default_rng(0)
    n = np.arange(1, n_modes + 1)
    lam = n**2 * np.pi**2 - 15.0
    g = np.sqrt(2.0) * n * np.pi * (-1.0) ** (n + 1)
    fb = np.zeros(n_modes)
    fb[0] = -1.38
    x = rng.normal(size=n_modes)
    dts = rng.uniform(0.25e-3, 1e-3, size=n_holds)
    kinds = np.full(n_holds, 1, dtype=np.uint8)
    kinds[:: max(n_holds // 50, 1)] |= 2
    t0 = time.perf_counter()
    impl.advance_modal(x, 0.0, lam, g, fb, 0.0, dts, kinds, x, 0.0)
    return time.perf_counter() - t0


def bench_theta(impl, n_steps: int, m: int = 400) -> float:
    rng = np.random.default_rng(1)
    h = 1.0 / (m + 1)
    dt = 1e-4
    off = dt / 2 / h**2
    lhs_lo = np.full(m, -off)
    lhs_di = np.full(m, 1 + 2 * off)
    lhs_up = np.full(m, -off)
    rhs_lo = np.full(m, off)
    rhs_di = np.full(m, 1 - 2 * off)
    rhs_up = np.full(m, off)
    force = np.zeros(m)
    force[-1] = off
    xi = rng.normal(size=m)
    t0 = time.perf_counter()
    impl.theta_steps(xi, n_steps, rhs_lo, rhs_di, rhs_up, lhs_lo, lhs_di, lhs_up, force)
    return time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--holds", type=int, default=200_000)
    ap.add_argument("--steps", type=int, default=20_000)
    args = ap.parse_args()

    backends = get_backends()
    print(f"available backends: {', '.join(backends)}")
    results: dict[str, dict[str, float]] = {}
    for name, impl in backends.items():
        results[name] = {
            "modal advance": bench_modal(impl, args.holds),
            "theta stepper": bench_theta(impl, args.steps),
        }
    print(f"\n{'kernel':<16}" + "".join(f"{name:>14}" for name in results))
    for kernel in ("modal advance", "theta stepper"):
        row = f"{kernel:<16}"
        for name in results:
            row += f"{results[name][kernel] * 1e3:>12.1f}ms"
        print(row)
    if "compiled" in results and "python" in results:
        print("\nspeedup (python / compiled):")
        for kernel in ("modal advance", "theta stepper"):
            ratio = results["python"][kernel] / results["compiled"][kernel]
            print(f"  {kernel}: {ratio:.1f}x")


if __name__ == "__main__":
    main()
