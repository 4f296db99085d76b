import numpy as np
import pytest

from zohpde.quadrature import (
    simpson_weights,
    sine_coefficients,
    sine_reconstruct,
    trapezoid_weights,
    uniform_grid,
)


def test_simpson_exact_on_cubics():
    z = uniform_grid(10)
    w = simpson_weights(10)
    assert np.dot(w, z**3) == pytest.approx(0.25, abs=1e-15)
    assert np.dot(w, z**2 - z) == pytest.approx(1 / 3 - 1 / 2, abs=1e-15)


def test_simpson_rejects_odd_interval_count():
    with pytest.raises(ValueError):
        simpson_weights(7)


def test_trapezoid_weights_sum_to_one():
    assert trapezoid_weights(13).sum() == pytest.approx(1.0, abs=1e-15)


def test_sine_coefficients_pick_out_modes():
    z = uniform_grid(512)
    f = np.sqrt(2) * np.sin(3 * np.pi * z) - 0.25 * np.sqrt(2) * np.sin(7 * np.pi * z)
    c = sine_coefficients(f)
    assert c[2] == pytest.approx(1.0, abs=1e-12)
    assert c[6] == pytest.approx(-0.25, abs=1e-12)
    mask = np.ones(len(c), dtype=bool)
    mask[[2, 6]] = False
    assert np.max(np.abs(c[mask])) < 1e-12


def test_sine_coefficients_of_parabola():
    # int z(1-z) sqrt(2) sin(n pi z) dz = sqrt(2) * 2 (1-(-1)^n) / (n pi)^3
    z = uniform_grid(4096)
    c = sine_coefficients(z * (1 - z))
    n = np.arange(1, 21)
    expected = np.sqrt(2) * 2 * (1 - (-1.0) ** n) / (n * np.pi) ** 3
    assert np.max(np.abs(c[:20] - expected)) < 1e-10


def test_reconstruct_roundtrip():
    z = uniform_grid(256)
    coeffs = np.array([0.3, -1.2, 0.0, 0.5])
    f = sine_reconstruct(coeffs, z)
    c = sine_coefficients(f)
    assert np.allclose(c[:4], coeffs, atol=1e-12)
