"""Quadrature and sine-series helpers on uniform grids over [0, 1].

Composite Simpson is the workhorse for weighted inner products (the grid
has M+1 points with M even, so pairs of intervals always align).  On such
grids Simpson integrates products of low sine modes essentially exactly
(discrete orthogonality), which is what makes 1e-8 Gram tolerances
attainable at moderate resolution.

The DST-based routines expand a sampled function in sqrt(2)*sin(n*pi*z),
the eigenbasis of the constant-coefficient Dirichlet operator.  Trapezoid
quadrature and a type-I DST coincide on that basis, so the discrete
Parseval identity holds to rounding.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import dst


def uniform_grid(m: int) -> np.ndarray:
    """Uniform grid of m+1 points on [0, 1]."""
    if m < 2:
        raise ValueError(f"grid needs at least 2 intervals, got {m}")
    return np.linspace(0.0, 1.0, m + 1)


def simpson_weights(m: int) -> np.ndarray:
    """Composite Simpson weights for a uniform grid of m+1 points (m even)."""
    if m < 2 or m % 2 != 0:
        raise ValueError(f"composite Simpson needs an even interval count, got {m}")
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * m)


def trapezoid_weights(m: int) -> np.ndarray:
    """Trapezoid weights for a uniform grid of m+1 points."""
    if m < 1:
        raise ValueError(f"grid needs at least 1 interval, got {m}")
    w = np.full(m + 1, 1.0 / m)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def sine_coefficients(samples: np.ndarray) -> np.ndarray:
    """Coefficients of f against sqrt(2)*sin(n*pi*z), n = 1..M-1.

    ``samples`` holds f on a uniform grid of M+1 points.  The returned
    coefficients are the trapezoid approximations of
    int_0^1 f(z) sqrt(2) sin(n pi z) dz; endpoint samples never enter
    because sin vanishes there.
    """
    m = len(samples) - 1
    if m < 2:
        raise ValueError("need at least 3 samples for a sine expansion")
    return dst(np.asarray(samples, dtype=float)[1:-1], type=1) * (np.sqrt(2.0) / (2.0 * m))


def sine_reconstruct(coeffs: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Evaluate sum_n coeffs[n-1] * sqrt(2) sin(n pi z) on ``grid``."""
    n = np.arange(1, len(coeffs) + 1)
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(grid, n)) @ np.asarray(coeffs)
