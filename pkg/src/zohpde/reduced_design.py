"""Reduced-model boundary controller: pole placement and certified period.

The m modes with lambda_{m+1} > 0 form a controllable finite-dimensional
system  x_n' + lambda_n x_n = g_n u  (controllability is a Vandermonde
fact once every g_n is nonzero).  A gain vector k makes
W = diag(-lambda) + g k' Hurwitz; the sampled loop with held input
u = k' x(tau_i) then stays exponentially stable for every schedule whose
gaps do not exceed a period T* computable from a small-gain inequality:

    F(T) = G/eps * |g| p1(T) e^{sigma T} |k| Gamma < 1,

with (G, sigma, eps) an envelope |e^{Wt}| <= G e^{-(sigma+eps)t},
p1(T) = (1 - e^{-lambda_1 T})/lambda_1 and Gamma = ||g k' - diag(lambda)||_F.
F is strictly increasing with F(0) = -1 < 0, so T* is its unique root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm, svdvals
from scipy.optimize import brentq

from .errors import NumericFailure
from .modal_sim import ModalFeedback
from .sl_operator import EigenSystem, SLProblem, input_gain

__all__ = [
    "ReducedController",
    "SamplingBound",
    "controllability_check",
    "place_poles",
    "envelope_constants",
    "gamma_constant",
    "max_sampling_period",
    "example_bound_T",
    "feedback_kernel",
    "iss_identity_check",
    "IssIdentityReport",
    "synthesize_reduced",
]


@dataclass(frozen=True)
class SamplingBound:
    """Certified sampling period and the constants that produced it."""

    T_star: float
    G: float
    sigma: float
    epsilon: float
    Gamma: float

    def condition_value(self, T: float, g_norm: float, k_norm: float, lambda1: float) -> float:
        """G/eps |g| p1(T) e^{sigma T} |k| Gamma; < 1 certifies the period T."""
        return (
            self.G
            / self.epsilon
            * g_norm
            * _p1(T, lambda1)
            * np.exp(self.sigma * T)
            * k_norm
            * self.Gamma
        )


@dataclass(frozen=True)
class ReducedController:
    """Feedback u = k' (x_1 .. x_m) acting on the retained unstable modes."""

    m: int
    k: np.ndarray
    g: np.ndarray
    lambdas: np.ndarray
    kernel: np.ndarray
    closed_loop_poles: np.ndarray
    bound: SamplingBound | None = None

    @property
    def W(self) -> np.ndarray:
        return np.diag(-self.lambdas) + np.outer(self.g, self.k)

    def modal_feedback(self, eigsys: EigenSystem) -> ModalFeedback:
        fb = np.zeros(eigsys.n_max)
        fb[: self.m] = self.k
        return ModalFeedback(fb=fb, fb_tail=0.0, uid=f"reduced(m={self.m})")

    def boundary_feedback_quadrature(self, z: np.ndarray, eigsys: EigenSystem) -> np.ndarray:
        """Kernel samples on an arbitrary grid: u = integral kernel * x dz."""
        pr = eigsys.problem
        if eigsys.analytic is not None:
            n = np.arange(1, self.m + 1)
            phi = np.sqrt(2.0) * np.sin(np.pi * np.outer(n, np.asarray(z)))
            return pr.r(z) * (self.k @ phi)
        from scipy.interpolate import CubicSpline

        vals = np.zeros_like(np.asarray(z, dtype=float))
        for l in range(self.m):
            spl = CubicSpline(eigsys.grid, eigsys.pairs[l].phi)
            vals += self.k[l] * spl(z)
        return pr.r(z) * vals


def _p1(T, lam1: float):
    T = np.asarray(T, dtype=float)
    if lam1 == 0.0:
        return T
    return -np.expm1(-lam1 * T) / lam1


def controllability_check(lambdas: np.ndarray, g: np.ndarray) -> tuple[bool, float]:
    """Vandermonde controllability of the retained modes.

    Returns (controllable, det) where det = prod_{i<j}(lambda_j - lambda_i)
    is the determinant of the Vandermonde matrix arising after scaling each
    mode by 1/g_n; it doubles as a conditioning diagnostic.  Any g_n = 0 is
    rejected (the scaling is undefined), duplicated eigenvalues collapse
    the determinant and are flagged degenerate.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(g == 0.0):
        raise ValueError("controllability scaling undefined: some g_n = 0")
    det = 1.0
    m = len(lambdas)
    for i in range(m):
        for j in range(i + 1, m):
            det *= lambdas[j] - lambdas[i]
    return (det != 0.0), float(det)


def place_poles(lambdas: np.ndarray, g: np.ndarray, desired: np.ndarray) -> np.ndarray:
    """Gain k with eig(diag(-lambda) + g k') equal to the desired set.

    Works in the coordinates xi_n = x_n / g_n where the input vector is
    all-ones; there the gain follows from Ackermann's formula, which for
    the diagonal pair evaluates in closed form,

        k_i g_i = -chi(-lambda_i) / prod_{j != i} (lambda_j - lambda_i),

    with chi the desired characteristic polynomial (the rank-one update
    makes the closed-loop characteristic polynomial affine in k).  Complex
    poles must come in conjugate pairs.  The result is verified by
    re-solving the closed-loop eigenproblem; verification failure signals
    the ill-conditioning that large mode counts are known to cause.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    g = np.asarray(g, dtype=float)
    desired = np.asarray(desired, dtype=complex)
    m = len(lambdas)
    if len(g) != m or len(desired) != m:
        raise ValueError("inconsistent dimensions")
    if np.any(desired.real >= 0):
        raise ValueError("desired poles must have negative real parts")
    if not np.allclose(np.sort_complex(desired), np.sort_complex(desired.conj())):
        raise ValueError("complex poles must come in conjugate pairs")
    ok, _ = controllability_check(lambdas, g)
    if not ok:
        raise ValueError("mode set is not controllable (degenerate eigenvalues)")

    k = np.empty(m)
    cond = 1.0
    for i in range(m):
        chi = complex(np.prod(-lambdas[i] - desired))
        others = np.delete(lambdas, i)
        sep = float(np.prod(others - lambdas[i])) if m > 1 else 1.0
        k[i] = -chi.real / (g[i] * sep)
        mags = np.abs(np.concatenate([(-lambdas[i] - desired), others - lambdas[i]]))
        if len(mags):
            cond = max(cond, float(np.max(mags) / max(np.min(mags), 1e-300)))

    W = np.diag(-lambdas) + np.outer(g, k)
    from scipy.linalg import eig as dense_eig

    vals, vl, vr = dense_eig(W, left=True)
    achieved = np.sort_complex(vals)
    target = np.sort_complex(desired)
    scale = max(1.0, float(np.max(np.abs(target))))
    # the verification eigensolve has forward error ~ eps ||W|| kappa_eig;
    # only flag errors beyond what a correct gain could possibly show
    kappa = 1.0
    for i in range(m):
        s = abs(np.vdot(vl[:, i], vr[:, i])) / (
            np.linalg.norm(vl[:, i]) * np.linalg.norm(vr[:, i])
        )
        kappa = max(kappa, 1.0 / max(s, 1e-300))
    attainable = 100.0 * np.finfo(float).eps * np.linalg.norm(W, 2) * kappa
    if np.max(np.abs(achieved - target)) > max(1e-8 * scale, attainable):
        raise NumericFailure(
            f"pole placement verification failed: wanted {target}, got {achieved} "
            f"(spread/separation ratio ~ {cond:.2e})"
        )
    return k


def envelope_constants(W: np.ndarray, margin: float = 0.01, t_samples: int = 2000) -> tuple[float, float, float]:
    """Constants (G, sigma, eps) with |e^{Wt}|_2 <= G e^{-(sigma+eps)t}.

    The decay budget mu (spectral abscissa magnitude) is split as
    sigma = mu/2 and eps = mu/2 - margin*mu; G is the supremum of
    |e^{Wt}| e^{(sigma+eps)t} over a sampled window, extended to all t by
    submultiplicativity once the window endpoint satisfies
    |e^{W t_cap}| e^{(sigma+eps) t_cap} <= 1.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    eigs = np.linalg.eigvals(W)
    mu = -float(np.max(eigs.real))
    if mu <= 0:
        raise ValueError("W is not Hurwitz")
    sigma = mu / 2.0
    eps = mu / 2.0 - margin * mu
    if W.shape[0] == 1:
        return 1.0, sigma, eps
    rate = sigma + eps
    # work with the shifted matrix: |e^{Wt}| e^{rate t} = |e^{(W + rate I)t}|,
    # whose spectral abscissa is the small negative -margin*mu
    Ws = W + rate * np.eye(W.shape[0])
    t_cap = 20.0 / mu
    for _ in range(200):
        if float(svdvals(expm(Ws * t_cap))[0]) <= 1.0:
            break
        t_cap *= 1.5
    else:
        raise NumericFailure("could not certify the envelope window")
    dt = t_cap / t_samples
    Estep = expm(Ws * dt)
    E = np.eye(W.shape[0])
    G = 1.0
    t_at_max = 0.0
    for i in range(t_samples):
        E = E @ Estep
        s = float(svdvals(E)[0])
        if s > G:
            G, t_at_max = s, (i + 1) * dt
    # refine around the coarse argmax; the scaled norm is smooth with
    # curvature scale 1/(margin*mu), so this pins the peak to ~1e-10
    for t in np.linspace(max(t_at_max - dt, 0.0), t_at_max + dt, 400):
        G = max(G, float(svdvals(expm(Ws * t))[0]))
    return float(G) * (1.0 + 1e-9), float(sigma), float(eps)


def gamma_constant(g: np.ndarray, k: np.ndarray, lambdas: np.ndarray) -> float:
    """Frobenius norm of g k' - diag(lambda): the one-hold drift constant."""
    g = np.asarray(g, dtype=float)
    k = np.asarray(k, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    M = np.outer(g, k) - np.diag(lambdas)
    return float(np.linalg.norm(M, "fro"))


def max_sampling_period(
    G: float,
    sigma: float,
    epsilon: float,
    g: np.ndarray,
    k: np.ndarray,
    Gamma: float,
    lambda1: float,
    xtol: float = 1e-10,
) -> SamplingBound:
    """Largest certified period: unique root of F(T) = 0 (see module docstring).

    Returns T* = inf when k = 0 (nothing is fed back, the retained modes
    are already stable by hypothesis).
    """
    g_norm = float(np.linalg.norm(np.atleast_1d(g)))
    k_norm = float(np.linalg.norm(np.atleast_1d(k)))
    bound = SamplingBound(T_star=np.inf, G=G, sigma=sigma, epsilon=epsilon, Gamma=Gamma)
    if k_norm == 0.0 or Gamma == 0.0:
        return bound

    def F(T: float) -> float:
        return bound.condition_value(T, g_norm, k_norm, lambda1) - 1.0

    hi = 1.0
    for _ in range(200):
        if F(hi) > 0:
            break
        hi *= 2.0
    else:
        return bound
    lo = hi * 1e-30
    while F(lo) > 0:
        lo *= 1e-3
        if lo < 1e-300:
            raise NumericFailure("condition does not vanish as T -> 0")
    T_star = brentq(F, lo, hi, xtol=xtol, rtol=8.9e-16, maxiter=300)
    return SamplingBound(T_star=float(T_star), G=G, sigma=sigma, epsilon=epsilon, Gamma=Gamma)


def example_bound_T(p: float, q: float, k_scalar: float, sigma: float) -> float:
    """Largest T satisfying the worked single-mode inequality

        k (k + p pi^2 - q) T e^{(q + sigma - p pi^2) T} + sigma < k + p pi^2 - q

    for the Dirichlet heat problem dx/dt = p x'' + q x with
    p pi^2 <= q < 4 p pi^2 and scalar gain k > q - p pi^2.
    """
    pp2 = p * np.pi**2
    if not (pp2 <= q < 4 * pp2):
        raise ValueError("requires p*pi^2 <= q < 4*p*pi^2")
    margin = k_scalar + pp2 - q
    if k_scalar <= q - pp2:
        raise ValueError("requires k > q - p*pi^2")
    if not (0 < sigma < margin):
        raise ValueError("no admissible T: requires 0 < sigma < k + p*pi^2 - q")

    def f(T: float) -> float:
        return k_scalar * margin * T * np.exp((q + sigma - pp2) * T) + sigma - margin

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return float(brentq(f, 0.0, hi, xtol=1e-12, rtol=8.9e-16))


def feedback_kernel(k: np.ndarray, eigsys: EigenSystem) -> np.ndarray:
    """Samples of z -> r(z) sum_l k_l phi_l(z); the spatial form of u."""
    k = np.asarray(k, dtype=float)
    m = len(k)
    if m > eigsys.n_max:
        raise ValueError("gain vector longer than the stored eigensystem")
    return eigsys.problem.r(eigsys.grid) * (k @ eigsys.phi_matrix[:m])


# ---------------------------------------------------------------------------
# tail ISS identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IssIdentityReport:
    """Closed-loop tail data: BVP integral vs its modal series.

    ``series_partial[j]`` is the sum of the first j+1 modal terms of the
    boundary-trace series; it converges from below to ``bvp_integral``.
    ``K_sigma`` is the tail ISS constant evaluated at the requested sigma.
    """

    bvp_integral: float
    series_partial: np.ndarray
    gap: np.ndarray
    K_sigma: float
    w: float
    sigma: float
    m: int

    @property
    def final_gap(self) -> float:
        return float(self.gap[-1])


def _solve_shifted_bvp(problem: SLProblem, w: float, grid: np.ndarray) -> np.ndarray:
    """Solve (p xbar')' - (q + w) xbar = 0 with homogeneous left BC and
    a1 xbar(1) + a2 xbar'(1) = sqrt(a1^2 + a2^2)."""
    pr = problem
    scale = np.sqrt(pr.a1**2 + pr.a2**2)
    if pr.p.is_constant and pr.q.is_constant:
        kappa = (pr.q.constant + w) / pr.p.constant
        beta = np.sqrt(abs(kappa))
        if kappa > 0:
            u1 = lambda z: np.cosh(beta * z)
            u2 = lambda z: np.sinh(beta * z) / beta
        elif kappa == 0:
            u1 = lambda z: np.ones_like(np.asarray(z, dtype=float))
            u2 = lambda z: np.asarray(z, dtype=float)
        else:
            u1 = lambda z: np.cos(beta * z)
            u2 = lambda z: np.sin(beta * z) / beta
        du1 = lambda z: kappa * u2(z)
        du2 = u1
        f = -pr.b2 * u1(grid) + pr.b1 * u2(grid)
        f1 = float(-pr.b2 * u1(1.0) + pr.b1 * u2(1.0))
        df1 = float(-pr.b2 * du1(1.0) + pr.b1 * du2(1.0))
        denom = pr.a1 * f1 + pr.a2 * df1
    else:
        from scipy.integrate import solve_ivp

        def rhs(z, y):
            return [y[1] / pr.p(z), (pr.q(z) + w) * y[0]]

        sol = solve_ivp(
            rhs,
            (0.0, 1.0),
            [-pr.b2, pr.b1 * pr.p(0.0)],
            rtol=1e-12,
            atol=1e-14,
            method="DOP853",
            t_eval=grid,
        )
        if not sol.success:
            raise NumericFailure("shifted BVP shooting failed")
        f = sol.y[0]
        denom = pr.a1 * sol.y[0, -1] + pr.a2 * sol.y[1, -1] / pr.p(1.0)
    if abs(denom) < 1e-12:
        raise ValueError("shifted BVP is singular; w must exceed -lambda_1")
    return f * (scale / denom)


def iss_identity_check(
    problem: SLProblem,
    eigsys: EigenSystem,
    w: float,
    sigma: float | None = None,
    m: int | None = None,
    n_terms: int | None = None,
) -> IssIdentityReport:
    """Check the boundary-trace series against the shifted BVP integral.

    The eigen-series  p(1)^2 sum_n (lambda_n + w)^{-2} |a1/s phi_n'(1) -
    a2/s phi_n(1)|^2  (s = sqrt(a1^2+a2^2)) sums exactly to the weighted
    integral of the shifted BVP solution; partial sums converge from
    below.  Also evaluates the tail ISS constant
    K = ((lambda_{m+1}+w)/(lambda_{m+1}-sigma))^2 * integral for a given
    sigma < lambda_{m+1}.
    """
    lams = eigsys.lambdas
    if w <= -lams[0]:
        raise ValueError("w must exceed -lambda_1")
    if m is None:
        m = max(1, int(np.count_nonzero(lams <= 0)))
    if m + 1 > eigsys.n_max and eigsys.analytic is None:
        raise ValueError("need lambda_{m+1}: store more modes")
    lam_m1 = (
        lams[m] if m < eigsys.n_max else float(eigsys.analytic.lam(m + 1))
    )
    if lam_m1 <= 0:
        raise ValueError("lambda_{m+1} must be positive; increase m")
    if sigma is None:
        sigma = lam_m1 / 2.0
    if sigma >= lam_m1:
        raise ValueError("sigma must lie below lambda_{m+1}")

    xbar = _solve_shifted_bvp(problem, w, eigsys.grid)
    integral = float(np.dot(eigsys.r_weights, xbar * xbar))

    pr = problem
    s = np.sqrt(pr.a1**2 + pr.a2**2)
    if n_terms is None:
        n_terms = eigsys.n_max
    if n_terms <= eigsys.n_max:
        dphi1 = np.array([p_.dphi1 for p_ in eigsys.pairs[:n_terms]])
        phi1 = np.array([p_.phi1 for p_ in eigsys.pairs[:n_terms]])
        lam_n = lams[:n_terms]
    elif eigsys.analytic is not None:
        n = np.arange(1, n_terms + 1)
        dphi1 = eigsys.analytic.dphi1(n)
        phi1 = np.zeros(n_terms)
        lam_n = eigsys.analytic.lam(n)
    else:
        raise ValueError(f"only {eigsys.n_max} modes stored; cannot sum {n_terms} terms")
    trace_sq = (pr.a1 / s * dphi1 - pr.a2 / s * phi1) ** 2
    terms = pr.p(1.0) ** 2 * trace_sq / (lam_n + w) ** 2
    partial = np.cumsum(terms)
    gap = np.abs(partial - integral) / integral
    K_sigma = ((lam_m1 + w) / (lam_m1 - sigma)) ** 2 * integral
    return IssIdentityReport(
        bvp_integral=integral,
        series_partial=partial,
        gap=gap,
        K_sigma=float(K_sigma),
        w=w,
        sigma=float(sigma),
        m=m,
    )


def synthesize_reduced(
    eigsys: EigenSystem,
    poles: np.ndarray | None = None,
    m: int | None = None,
) -> ReducedController:
    """Full reduced-model design: mode count, gains, kernel, certified T*.

    m defaults to the smallest count with lambda_{m+1} > 0; poles default
    to {-1, ..., -m} scaled by max(1, |lambda_1|).
    """
    lams = eigsys.lambdas
    if m is None:
        m = max(1, int(np.count_nonzero(lams <= 0)))
    if m >= eigsys.n_max:
        raise ValueError("m exceeds the stored mode count; recompute with larger n_max")
    if lams[m] <= 0:
        raise ValueError(f"lambda_(m+1) = {lams[m]:.6g} is not positive; increase m")
    lam_m = lams[:m]
    g = eigsys.gains[:m]
    if poles is None:
        poles = -np.arange(1, m + 1, dtype=float) * max(1.0, abs(lams[0]))
    poles = np.asarray(poles, dtype=complex)
    k = place_poles(lam_m, g, poles)
    W = np.diag(-lam_m) + np.outer(g, k)
    G, sigma, eps = envelope_constants(W)
    Gamma = gamma_constant(g, k, lam_m)
    bound = max_sampling_period(G, sigma, eps, g, k, Gamma, lam_m[0])
    kernel = feedback_kernel(k, eigsys)
    return ReducedController(
        m=m,
        k=k,
        g=g,
        lambdas=lam_m,
        kernel=kernel,
        closed_loop_poles=np.asarray(poles),
        bound=bound,
    )
