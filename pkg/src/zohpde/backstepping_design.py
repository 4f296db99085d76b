"""Backstepping boundary controller for the constant-coefficient plant.

For  dx/dt = p x'' + q x,  x(0) = 0,  x(1) = u  the lower-triangular
Volterra transform  y = x - integral_0^z K(z,s) x(s) ds  with the
closed-form Bessel kernel

    K(z, s) = -lam * s * I1(xi)/xi,   xi = sqrt(lam (z^2 - s^2)),
    lam = (q + c)/p,

maps the plant to the target  dy/dt = p y'' - c y  (Dirichlet), and the
feedback  u = integral k(s) x(s) ds  with k(s) = K(1, s) inherits the
target's decay.  Under zero-order hold the mismatch between the held and
the nominal input acts as a boundary disturbance on the target system; a
truncation of k to N retained modes plus an ISS gain of the target yields
an explicit (very conservative) certified sampling period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import idst
from scipy.optimize import brentq

from .errors import InfeasibleTruncation, NumericFailure, RequestMoreModes
from .modal_sim import ModalFeedback, Trace, TransformDiagnostics
from .quadrature import sine_coefficients, simpson_weights, trapezoid_weights, uniform_grid
from .sl_operator import EigenSystem, SLProblem, boundary_lifting, shoot_eigensystem

__all__ = [
    "bessel_i1",
    "gain_kernel",
    "kernel_surface",
    "inverse_kernel",
    "volterra_apply",
    "transform_norms",
    "modal_truncation",
    "TruncationResult",
    "target_iss_gain",
    "TargetIss",
    "backstepping_T_bound",
    "backstepping_condition_value",
    "BacksteppingController",
    "synthesize_backstepping",
    "diagnostics_vw",
]


# ---------------------------------------------------------------------------
# modified Bessel function of order one
# ---------------------------------------------------------------------------

_I1_SERIES_CUT = 15.0
# asymptotic coefficients a_k = prod_{j=1..k} (4 - (2j-1)^2) / (k! 8^k),
# used as I1(x) ~ e^x/sqrt(2 pi x) sum (-1)^k a_k x^{-k}
_I1_ASYMPTOTIC = [
    1.0,
    3.0 / 8.0,
    -15.0 / 128.0,
    105.0 / 1024.0,
    -4725.0 / 32768.0,
    72765.0 / 262144.0,
    -2837835.0 / 4194304.0,
    66891825.0 / 33554432.0,
    -14783093325.0 / 2147483648.0,
    468131288625.0 / 17179869184.0,
]


def _i1_series(x: np.ndarray) -> np.ndarray:
    """Power series sum_m (x/2)^(2m+1) / (m! (m+1)!), summed to 1e-14."""
    half = x / 2.0
    term = half.copy()
    total = term.copy()
    m = 0
    while True:
        m += 1
        term = term * (half * half) / (m * (m + 1))
        total += term
        if np.all(np.abs(term) <= 1e-14 * np.maximum(np.abs(total), 1e-300)) or m > 60:
            return total


def _i1_asymptotic(x: np.ndarray) -> np.ndarray:
    inv = 1.0 / x
    acc = np.zeros_like(x)
    for k in range(len(_I1_ASYMPTOTIC) - 1, -1, -1):
        acc = acc * inv + ((-1.0) ** k) * _I1_ASYMPTOTIC[k]
    return np.exp(x) / np.sqrt(2.0 * np.pi * x) * acc


def bessel_i1(x):
    """Modified Bessel function I1 for real x >= 0.

    Power series below x = 15, scaled asymptotic expansion beyond; both
    branches agree to ~1e-14 relative at the crossover.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("bessel_i1 requires x >= 0")
    out = np.empty_like(arr)
    small = arr <= _I1_SERIES_CUT
    if np.any(small):
        out[small] = _i1_series(arr[small])
    if np.any(~small):
        out[~small] = _i1_asymptotic(arr[~small])
    if np.ndim(x) == 0:
        return float(out)
    return out


def _i1_over_x(x: np.ndarray) -> np.ndarray:
    """I1(x)/x with the removable singularity I1(x)/x -> 1/2 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, 0.5)
    nz = x > 1e-8
    if np.any(nz):
        out[nz] = bessel_i1(x[nz]) / x[nz]
    return out


# ---------------------------------------------------------------------------
# kernels and transforms
# ---------------------------------------------------------------------------


def gain_kernel(p: float, q: float, c: float, s) -> np.ndarray | float:
    """Boundary gain kernel k(s) = -((q+c)/p) s I1(xi)/xi,
    xi = sqrt((q+c)/p (1 - s^2)).

    ``q`` is the growth-form reaction constant of dx/dt = p x'' + q x;
    requires q + c >= 0 so the argument stays real.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    if q + c < 0:
        raise ValueError("requires q + c >= 0; pick c >= max(0, -q)")
    sv = np.asarray(s, dtype=float)
    lam = (q + c) / p
    xi = np.sqrt(np.maximum(lam * (1.0 - sv * sv), 0.0))
    out = -lam * sv * _i1_over_x(xi)
    if np.ndim(s) == 0:
        return float(out)
    return out


def kernel_surface(p: float, q: float, c: float, grid: np.ndarray) -> np.ndarray:
    """Kernel samples K(z, s) on the triangle 0 <= s <= z <= 1.

    K(z,s) = -((q+c)/p) s I1(xi)/xi with xi = sqrt((q+c)/p (z^2 - s^2));
    entries above the diagonal are zero.  The restriction K(1, .) equals
    ``gain_kernel`` exactly and the diagonal satisfies
    K(z, z) = -(q+c) z / (2p).
    """
    if p <= 0:
        raise ValueError("p must be positive")
    if q + c < 0:
        raise ValueError("requires q + c >= 0; pick c >= max(0, -q)")
    z = np.asarray(grid, dtype=float)
    lam = (q + c) / p
    Z, S = np.meshgrid(z, z, indexing="ij")
    xi = np.sqrt(np.maximum(lam * (Z * Z - S * S), 0.0))
    K = -lam * S * _i1_over_x(xi)
    return np.tril(K)


def _apply_matrix(kernel: np.ndarray) -> np.ndarray:
    """Trapezoid matrix A with (A x)_j = integral_0^{z_j} ker(z_j, s) x(s) ds."""
    npts = kernel.shape[0]
    h = 1.0 / (npts - 1)
    A = np.tril(kernel) * h
    A[:, 0] *= 0.5
    idx = np.arange(npts)
    A[idx, idx] *= 0.5
    A[0, 0] = 0.0
    return A


def volterra_apply(x: np.ndarray, kernel: np.ndarray, direction: str) -> np.ndarray:
    """Apply the Volterra transform to grid samples.

    forward: y(z) = x(z) - integral_0^z ker(z,s) x(s) ds
    inverse: x(z) = y(z) + integral_0^z ker(z,s) y(s) ds
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != kernel.shape[0]:
        raise ValueError("sample count does not match the kernel grid")
    sign = {"forward": -1.0, "inverse": +1.0}.get(direction)
    if sign is None:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return x + sign * (_apply_matrix(kernel) @ x)


def inverse_kernel(K: np.ndarray, resid_tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Inverse transform kernel by successive approximations.

    Iterates the reciprocity relation L = K + L o K in its discrete
    (trapezoid) form, i.e. the Neumann series of the quadrature operator:
    B_{j+1} = A + A B_j with A the forward apply-matrix.  The fixed point
    is the exact resolvent of the discrete forward transform, so the
    inverse transform built from the returned samples inverts the forward
    one to rounding; the samples converge to the continuum inverse kernel
    at the quadrature's O(h^2).
    """
    A = _apply_matrix(K)
    scale = max(float(np.max(np.abs(A))), 1e-300)
    B = A.copy()
    for _ in range(max_iter):
        Bn = A + A @ B
        resid = float(np.max(np.abs(Bn - B)))
        B = Bn
        if resid <= resid_tol * scale:
            break
    else:
        raise NumericFailure(f"inverse-kernel iteration did not converge in {max_iter} sweeps")
    npts = K.shape[0]
    h = 1.0 / (npts - 1)
    W = np.tril(np.full((npts, npts), h))
    W[:, 0] *= 0.5
    idx = np.arange(npts)
    W[idx, idx] *= 0.5
    W[0, 0] = 0.0
    L = np.divide(B, W, out=np.array(np.tril(K), dtype=float), where=W > 0)
    return np.tril(L)


def transform_norms(K: np.ndarray, L: np.ndarray) -> tuple[float, float]:
    """Operator-norm bounds 1 + ||ker||_{L2(triangle)} of both transforms."""

    def tilde(ker: np.ndarray) -> float:
        npts = ker.shape[0]
        h = 1.0 / (npts - 1)
        inner = np.empty(npts)
        inner[0] = 0.0
        for j in range(1, npts):
            w = np.full(j + 1, h)
            w[0] = w[-1] = h / 2
            inner[j] = float(np.dot(w, ker[j, : j + 1] ** 2))
        wz = trapezoid_weights(npts - 1)
        return 1.0 + float(np.sqrt(max(np.dot(wz, inner), 0.0)))

    return tilde(np.asarray(K)), tilde(np.asarray(L))


# ---------------------------------------------------------------------------
# modal truncation of the gain kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationResult:
    """Retained-mode expansion of the gain kernel.

    ``coeffs_all`` holds every resolvable modal coefficient of k (the
    first N of them define the truncation g); ``kg_norm`` is
    ||k - g||_2 via the discrete Parseval identity, which coincides with
    direct quadrature of (k - g)^2 on the same grid to rounding.
    """

    N: int
    k_n: np.ndarray
    g_samples: np.ndarray
    kg_norm: float
    k_norm: float
    coeffs_all: np.ndarray


def modal_truncation(
    kernel_k: np.ndarray,
    eigsys: EigenSystem,
    gamma: float,
    L_tilde: float,
) -> TruncationResult:
    """Smallest N with 2 gamma L~ ||k - g_N||_2 < 1, plus the expansion.

    ``kernel_k`` are samples of the gain kernel on a uniform grid of its
    own (any resolution).  For analytic eigensystems the coefficients come
    from a sine transform of those samples, so N may exceed the stored
    pair count; otherwise quadrature against the stored eigenfunctions
    caps N at n_max and a RequestMoreModes error asks for more.
    """
    if gamma <= 0 or L_tilde <= 0:
        raise ValueError("gamma and L_tilde must be positive")
    kernel_k = np.asarray(kernel_k, dtype=float)
    mk = len(kernel_k) - 1
    if eigsys.analytic is not None:
        coeffs = sine_coefficients(kernel_k)
        wk = trapezoid_weights(mk)
        k_norm_sq = float(np.dot(wk, kernel_k**2))
    else:
        if kernel_k.shape != eigsys.grid.shape:
            raise ValueError("for non-analytic systems the kernel must live on the eigensystem grid")
        coeffs = eigsys.phi_matrix @ (eigsys.weights * kernel_k)
        k_norm_sq = float(np.dot(eigsys.weights, kernel_k**2))

    tail_sq = np.maximum(k_norm_sq - np.cumsum(coeffs**2), 0.0)
    feasible = 2.0 * gamma * L_tilde * np.sqrt(tail_sq) < 1.0
    if not np.any(feasible):
        if eigsys.analytic is not None:
            raise RequestMoreModes(
                f"no feasible N among the {len(coeffs)} resolvable modes; sample the kernel finer"
            )
        raise RequestMoreModes(
            f"no feasible N among the {eigsys.n_max} stored modes; recompute with larger n_max"
        )
    N = int(np.argmax(feasible)) + 1
    kg = float(np.sqrt(tail_sq[N - 1]))
    if eigsys.analytic is not None:
        scale = np.sqrt(2.0) / (2.0 * mk)
        padded = np.zeros(mk - 1)
        padded[:N] = coeffs[:N]
        g_samples = np.concatenate([[0.0], idst(padded / scale, type=1), [0.0]])
    else:
        g_samples = coeffs[:N] @ eigsys.phi_matrix[:N]
    return TruncationResult(
        N=N,
        k_n=coeffs[:N].copy(),
        g_samples=g_samples,
        kg_norm=kg,
        k_norm=float(np.sqrt(k_norm_sq)),
        coeffs_all=coeffs,
    )


# ---------------------------------------------------------------------------
# target-system ISS gain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetIss:
    """ISS data of the target system dy/dt = p y'' - c y (right Dirichlet).

    The estimate ||y[t]|| <= G e^{-sigma t} ||y[0]|| + gamma sup_s
    (|v(s)| e^{-sigma (t-s)}) holds with G = sqrt(2) and
    gamma = sqrt(2 K(sigma)) for any sigma in (0, mu_1).
    """

    gamma: float
    sigma: float
    sigma_max: float
    mu: np.ndarray
    dpsi1: np.ndarray
    xbar_int: float
    p: float = 1.0
    G: float = math.sqrt(2.0)

    def identity_partial_sums(self, n_terms: int | None = None) -> np.ndarray:
        """Partial sums of p^2 sum mu_n^{-2} psi_n'(1)^2, which converge
        (from below) to the boundary-trace integral ``xbar_int``.
        """
        mu = self.mu if n_terms is None else self.mu[:n_terms]
        dpsi1 = self.dpsi1 if n_terms is None else self.dpsi1[:n_terms]
        return np.cumsum((self.p * dpsi1) ** 2 / mu**2)


def target_iss_gain(
    p: float,
    c: float,
    b1: float = 1.0,
    b2: float = 0.0,
    sigma: float | None = None,
    n_spectrum: int = 512,
    grid_m: int = 400,
) -> TargetIss:
    """ISS gain of the target system via its boundary-trace integral.

    Solves p xbar'' - c xbar = 0 with b1 xbar(0) + b2 xbar'(0) = 0 and
    xbar(1) = 1 (closed form), computes I = integral xbar^2, and returns
    gamma = sqrt(2 K) with K(sigma) = (mu_1/(mu_1 - sigma))^2 I, together
    with the target spectrum (mu_n, psi_n'(1)) for diagnostics.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    if c < 0:
        raise ValueError("c must be nonnegative")
    n = np.arange(1, n_spectrum + 1)
    if b2 == 0.0:
        mu = n**2 * np.pi**2 * p + c
        dpsi1 = np.sqrt(2.0) * n * np.pi * np.where(n % 2 == 0, 1.0, -1.0)
    elif b1 == 0.0:
        half = n - 0.5
        mu = half**2 * np.pi**2 * p + c
        dpsi1 = np.sqrt(2.0) * half * np.pi * np.where(n % 2 == 0, 1.0, -1.0)
    else:
        tgt = SLProblem(p=p, q=c, r=1.0, b1=b1, b2=b2, a1=1.0, a2=0.0)
        es = shoot_eigensystem(tgt, n_max=min(n_spectrum, 64), grid_size=grid_m)
        mu = es.lambdas
        dpsi1 = np.array([pr.dphi1 for pr in es.pairs])
    mu1 = float(mu[0])
    if mu1 <= 0:
        raise ValueError("target spectrum is not positive; increase c")
    if sigma is None:
        sigma = mu1 / 2.0
    if not (0.0 < sigma < mu1):
        raise ValueError(f"sigma must lie in (0, mu_1) = (0, {mu1:.6g})")

    grid = uniform_grid(grid_m)
    kappa = c / p
    beta = np.sqrt(kappa)
    if kappa > 0:
        u1 = np.cosh(beta * grid)
        u2 = np.sinh(beta * grid) / beta
        u1_end, u2_end = np.cosh(beta), np.sinh(beta) / beta
    else:
        u1 = np.ones_like(grid)
        u2 = grid
        u1_end, u2_end = 1.0, 1.0
    f = -b2 * u1 + b1 * u2
    f_end = -b2 * u1_end + b1 * u2_end
    if abs(f_end) < 1e-14:
        raise ValueError("target boundary-value problem is singular for these (b1, b2, c)")
    xbar = f / f_end
    w = simpson_weights(grid_m)
    integral = float(np.dot(w, xbar * xbar))

    K = (mu1 / (mu1 - sigma)) ** 2 * integral
    return TargetIss(
        gamma=float(np.sqrt(2.0 * K)),
        sigma=float(sigma),
        sigma_max=mu1,
        mu=mu.astype(float),
        dpsi1=dpsi1.astype(float),
        xbar_int=integral,
        p=float(p),
    )


# ---------------------------------------------------------------------------
# certified sampling period
# ---------------------------------------------------------------------------


def backstepping_condition_value(
    T: float,
    gamma: float,
    L_tilde: float,
    sigma: float,
    p: float,
    k_norm: float,
    k_n: np.ndarray,
    lam_n: np.ndarray,
    dphi1_n: np.ndarray,
    kg_norm: float,
) -> float:
    """Left-hand side of the self-map inequality; < 1 certifies T."""
    bracket = p * k_norm * float(np.sum(np.abs(k_n * dphi1_n))) + float(np.sum(np.abs(k_n * lam_n)))
    eT = np.exp(sigma * T)
    return gamma * L_tilde * (T * eT * bracket + kg_norm * (eT + 1.0))


def backstepping_T_bound(
    gamma: float,
    L_tilde: float,
    sigma: float,
    p: float,
    k_norm: float,
    k_n: np.ndarray,
    lam_n: np.ndarray,
    dphi1_n: np.ndarray,
    kg_norm: float,
    xtol_rel: float = 1e-12,
) -> float:
    """Largest T with condition value < 1 (strictly increasing in T).

    Raises InfeasibleTruncation when the T -> 0 limit
    2 gamma L~ ||k - g|| already reaches 1 (increase N); returns inf when
    the condition vanishes identically (exact finite expansion).
    """
    base = 2.0 * gamma * L_tilde * kg_norm
    if base >= 1.0:
        raise InfeasibleTruncation(
            f"2 gamma L~ ||k-g|| = {base:.6g} >= 1 at T -> 0; increase the truncation order"
        )
    args = (gamma, L_tilde, sigma, p, k_norm, k_n, lam_n, dphi1_n, kg_norm)
    bracket = p * k_norm * float(np.sum(np.abs(k_n * dphi1_n))) + float(np.sum(np.abs(k_n * lam_n)))
    if bracket == 0.0 and kg_norm == 0.0:
        return float("inf")

    def F(T: float) -> float:
        return backstepping_condition_value(T, *args) - 1.0

    hi = 1.0
    for _ in range(400):
        if F(hi) > 0:
            break
        hi *= 2.0
    else:
        return float("inf")
    lo = hi
    while F(lo) > 0:
        lo *= 0.5
        if lo < 1e-300:
            raise NumericFailure("condition stuck above 1 for all positive T")
    return float(brentq(F, lo, hi, xtol=lo * xtol_rel, rtol=8.9e-16, maxiter=500))


# ---------------------------------------------------------------------------
# controller object and synthesis pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BacksteppingController:
    """Closed-form backstepping feedback with certified sampling period."""

    p: float
    q: float
    c: float
    sigma: float
    gamma: float
    K_tilde: float
    L_tilde: float
    N: int
    k_n: np.ndarray
    kg_norm: float
    k_norm: float
    T_star: float
    kernel_grid: np.ndarray
    kernel_k: np.ndarray
    K_surface: np.ndarray
    L_surface: np.ndarray
    g_trunc: np.ndarray
    coeffs_all: np.ndarray
    h_coeffs_all: np.ndarray
    int_k_h: float
    target: TargetIss

    def _check(self, eigsys: EigenSystem) -> None:
        an = eigsys.analytic
        if an is None or abs(an.p - self.p) > 1e-12 or abs(an.growth - self.q) > 1e-12:
            raise ValueError("eigensystem does not match this controller's plant")

    def modal_feedback(self, eigsys: EigenSystem) -> ModalFeedback:
        self._check(eigsys)
        n = eigsys.n_max
        fb = self.coeffs_all[:n].copy()
        fb_tail = self.int_k_h - float(np.dot(self.coeffs_all[:n], self.h_coeffs_all[:n]))
        return ModalFeedback(fb=fb, fb_tail=fb_tail, uid=f"backstepping(c={self.c:g})")

    def transform_diagnostics(self, eigsys: EigenSystem) -> TransformDiagnostics:
        self._check(eigsys)
        n = eigsys.n_max
        kv = self.coeffs_all[:n].copy()
        kv_tail = self.int_k_h - float(np.dot(kv, self.h_coeffs_all[:n]))
        gv = np.zeros(n)
        upto = min(self.N, n)
        gv[:upto] = self.coeffs_all[:upto]
        if self.N > n:
            gv_tail = float(np.dot(self.coeffs_all[n : self.N], self.h_coeffs_all[n : self.N]))
        else:
            gv_tail = 0.0
        return TransformDiagnostics(
            kv=kv,
            kv_tail=kv_tail,
            gv=gv,
            gv_tail=gv_tail,
            K_samples=kernel_surface(self.p, self.q, self.c, eigsys.grid),
            sigma=self.sigma,
            gamma=self.gamma,
        )

    def boundary_feedback_quadrature(self, z: np.ndarray, eigsys: EigenSystem | None = None) -> np.ndarray:
        return gain_kernel(self.p, self.q, self.c, np.asarray(z, dtype=float))


def default_shift(p: float, q: float) -> float:
    """Default target shift: clears the unstable spectrum with headroom."""
    lam1 = np.pi**2 * p - q
    return max(0.0, -lam1) + 0.5 * np.pi**2 * p


def synthesize_backstepping(
    p: float,
    q: float,
    c: float | None = None,
    sigma: float | None = None,
    kernel_grid_m: int = 400,
    fine_m: int = 2**17,
) -> BacksteppingController:
    """Full backstepping design for dx/dt = p x'' + q x, x(0)=0, x(1)=u.

    Builds the kernel surface and its inverse, the transform-norm bounds,
    the target ISS gain, the modal truncation satisfying the small-gain
    prerequisite, and the certified sampling period.  ``fine_m`` sets the
    resolution of the sine expansion used for the (slowly decaying) modal
    coefficients of the gain kernel.
    """
    if c is None:
        c = default_shift(p, q)
    if q + c < 0:
        raise ValueError(
            f"q + c = {q + c:g} < 0; choose c >= max(0, -q) (default rule: {default_shift(p, q):g})"
        )
    grid = uniform_grid(kernel_grid_m)
    K = kernel_surface(p, q, c, grid)
    L = inverse_kernel(K)
    K_tilde, L_tilde = transform_norms(K, L)
    tgt = target_iss_gain(p, c, b1=1.0, b2=0.0, sigma=sigma)

    fine = uniform_grid(fine_m)
    k_fine = gain_kernel(p, q, c, fine)
    lift = boundary_lifting(1.0, 0.0)
    h_fine = lift(fine)
    wf = trapezoid_weights(fine_m)
    int_k_h = float(np.dot(wf, k_fine * h_fine))
    h_coeffs_all = sine_coefficients(h_fine)

    # the analytic eigensystem of the plant, used only as a descriptor here
    from .sl_operator import analytic_eigensystem

    eigs_desc = analytic_eigensystem(p, q, n_max=1, grid_size=max(4, kernel_grid_m))
    trunc = modal_truncation(k_fine, eigs_desc, tgt.gamma, L_tilde)

    n = np.arange(1, trunc.N + 1)
    lam_n = eigs_desc.analytic.lam(n)
    dphi1_n = eigs_desc.analytic.dphi1(n)
    T_star = backstepping_T_bound(
        tgt.gamma, L_tilde, tgt.sigma, p, trunc.k_norm, trunc.k_n, lam_n, dphi1_n, trunc.kg_norm
    )

    from scipy.interpolate import CubicSpline

    g_on_kernel_grid = CubicSpline(fine, trunc.g_samples)(grid)

    return BacksteppingController(
        p=p,
        q=q,
        c=c,
        sigma=tgt.sigma,
        gamma=tgt.gamma,
        K_tilde=K_tilde,
        L_tilde=L_tilde,
        N=trunc.N,
        k_n=trunc.k_n,
        kg_norm=trunc.kg_norm,
        k_norm=trunc.k_norm,
        T_star=T_star,
        kernel_grid=grid,
        kernel_k=gain_kernel(p, q, c, grid),
        K_surface=K,
        L_surface=L,
        g_trunc=g_on_kernel_grid,
        coeffs_all=trunc.coeffs_all,
        h_coeffs_all=h_coeffs_all,
        int_k_h=int_k_h,
        target=tgt,
    )


def diagnostics_vw(trace: Trace) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Input-mismatch diagnostics of a simulated backstepping run.

    Returns (v, w, residual): v is the held-minus-nominal input mismatch,
    w its retained-mode part, and residual the defect of the exact
    decomposition v = w + <k - g, x(tau_i) - x(t)>, which vanishes to
    rounding.  Both v and w are zero at every sampling instant.
    """
    if trace.v is None or trace.w is None or trace.vw_residual is None:
        raise ValueError("trace carries no v/w diagnostics; simulate with diagnostics=True")
    return trace.v, trace.w, trace.vw_residual
