"""Sturm-Liouville operator: eigensystems, boundary lifting, input gains.

The operator is A f = (-(p f')' + q f) / r on [0, 1] with separated
boundary conditions

    b1 f(0) + b2 f'(0) = 0,      a1 f(1) + a2 f'(1) = 0,

p > 0, r > 0.  Its spectrum is an increasing real sequence lambda_1 <
lambda_2 < ... -> +inf and the eigenfunctions form an orthonormal basis of
the r-weighted L2 space.  Constant-coefficient Dirichlet problems get the
closed-form eigensystem; everything else goes through a shooting solver
with Pruefer-angle bracketing.

Sign convention note: ``q`` here is the operator's reaction coefficient.
A PDE written in growth form  dx/dt = p x'' + kappa x  corresponds to
q = -kappa, hence the convenience constructors taking a growth constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import NumericFailure
from .quadrature import simpson_weights, uniform_grid

__all__ = [
    "Coefficient",
    "SLProblem",
    "EigenPair",
    "EigenSystem",
    "AnalyticSpec",
    "LiftingPolynomial",
    "ValidationReport",
    "boundary_lifting",
    "analytic_eigensystem",
    "shoot_eigensystem",
    "validate_eigensystem",
    "input_gain",
]


class Coefficient:
    """A coefficient function on [0, 1]: a constant, a callable or a table.

    Tabulated data is interpolated with a cubic spline.
    """

    def __init__(self, spec: float | Callable[[np.ndarray], np.ndarray] | tuple):
        self._const = None
        if np.isscalar(spec):
            self._const = float(spec)
            self._fn = lambda z: np.full_like(np.asarray(z, dtype=float), self._const)
        elif callable(spec):
            self._fn = lambda z: np.asarray(spec(np.asarray(z, dtype=float)), dtype=float)
        else:
            znodes, vals = spec
            spline = CubicSpline(np.asarray(znodes, float), np.asarray(vals, float))
            self._fn = spline

    @property
    def is_constant(self) -> bool:
        return self._const is not None

    @property
    def constant(self) -> float:
        if self._const is None:
            raise ValueError("coefficient is not a constant")
        return self._const

    def __call__(self, z):
        out = self._fn(np.asarray(z, dtype=float))
        if np.ndim(z) == 0:
            return float(out)
        return out


def _as_coeff(c) -> Coefficient:
    return c if isinstance(c, Coefficient) else Coefficient(c)


@dataclass(frozen=True)
class SLProblem:
    """Operator data: coefficients p, q, r and boundary constants.

    ``q`` uses the operator convention (see module docstring).  Instances
    are immutable and safe to share across threads.
    """

    p: Coefficient
    q: Coefficient
    r: Coefficient
    b1: float
    b2: float
    a1: float
    a2: float

    def __post_init__(self):
        object.__setattr__(self, "p", _as_coeff(self.p))
        object.__setattr__(self, "q", _as_coeff(self.q))
        object.__setattr__(self, "r", _as_coeff(self.r))
        if abs(self.a1) + abs(self.a2) <= 0:
            raise ValueError("need |a1| + |a2| > 0")
        if abs(self.b1) + abs(self.b2) <= 0:
            raise ValueError("need |b1| + |b2| > 0")
        probe = np.linspace(0.0, 1.0, 101)
        if np.any(self.p(probe) <= 0):
            raise ValueError("diffusion coefficient p must be positive on [0, 1]")
        if np.any(self.r(probe) <= 0):
            raise ValueError("weight r must be positive on [0, 1]")

    @staticmethod
    def constant_dirichlet(p: float, growth: float) -> "SLProblem":
        """Dirichlet-Dirichlet problem for dx/dt = p x'' + growth * x."""
        return SLProblem(p=p, q=-growth, r=1.0, b1=1.0, b2=0.0, a1=1.0, a2=0.0)

    @property
    def is_constant_dirichlet(self) -> bool:
        return (
            self.p.is_constant
            and self.q.is_constant
            and self.r.is_constant
            and self.r.constant == 1.0
            and self.a1 == 1.0
            and self.a2 == 0.0
            and self.b1 == 1.0
            and self.b2 == 0.0
        )


@dataclass(frozen=True)
class AnalyticSpec:
    """Closed-form spectrum descriptor for the constant Dirichlet case.

    lambda_n = n^2 pi^2 p - growth,  phi_n = sqrt(2) sin(n pi z).  Lets
    consumers extend modal machinery far beyond the stored pairs without
    materialising dense eigenfunction samples.
    """

    p: float
    growth: float

    def lam(self, n) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        return n**2 * np.pi**2 * self.p - self.growth

    def dphi1(self, n) -> np.ndarray:
        """phi_n'(1) = sqrt(2) n pi cos(n pi)."""
        n = np.asarray(n)
        return np.sqrt(2.0) * n * np.pi * np.where(n % 2 == 0, 1.0, -1.0)

    def gain(self, n) -> np.ndarray:
        """Boundary input gain -p phi_n'(1) of the Dirichlet-actuated modes."""
        return -self.p * self.dphi1(n)


@dataclass(frozen=True)
class EigenPair:
    n: int
    lam: float
    phi: np.ndarray
    phi0: float
    dphi0: float
    phi1: float
    dphi1: float
    max_abs_phi: float


@dataclass(frozen=True)
class EigenSystem:
    """Ordered eigenpairs on a shared uniform grid."""

    problem: SLProblem
    grid: np.ndarray
    pairs: tuple[EigenPair, ...]
    analytic: AnalyticSpec | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_max(self) -> int:
        return len(self.pairs)

    @property
    def m_intervals(self) -> int:
        return len(self.grid) - 1

    @property
    def lambdas(self) -> np.ndarray:
        if "lambdas" not in self._cache:
            self._cache["lambdas"] = np.array([pr.lam for pr in self.pairs])
        return self._cache["lambdas"]

    @property
    def phi_matrix(self) -> np.ndarray:
        """(n_max, grid) matrix of eigenfunction samples."""
        if "phi" not in self._cache:
            self._cache["phi"] = np.vstack([pr.phi for pr in self.pairs])
        return self._cache["phi"]

    @property
    def weights(self) -> np.ndarray:
        """Simpson quadrature weights on the grid."""
        if "w" not in self._cache:
            self._cache["w"] = simpson_weights(self.m_intervals)
        return self._cache["w"]

    @property
    def r_weights(self) -> np.ndarray:
        """r-weighted Simpson weights: inner(f, g) = sum r_weights f g."""
        if "rw" not in self._cache:
            self._cache["rw"] = self.weights * self.problem.r(self.grid)
        return self._cache["rw"]

    @property
    def gains(self) -> np.ndarray:
        """Input gains g_n of all stored pairs."""
        if "g" not in self._cache:
            self._cache["g"] = np.array([input_gain(pr, self.problem) for pr in self.pairs])
        return self._cache["g"]

    def inner_r(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.dot(self.r_weights, f * g))

    def norm_r(self, f: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner_r(f, f), 0.0)))


@dataclass(frozen=True)
class LiftingPolynomial:
    """h(z) = sigma1 z^2 + sigma2 z^3 with h(0) = h'(0) = 0 and
    a1 h(1) + a2 h'(1) = 1.  Subtracting u(t) h(z) turns the actuated
    boundary condition homogeneous."""

    sigma1: float
    sigma2: float

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return self.sigma1 * z**2 + self.sigma2 * z**3

    def deriv(self, z):
        z = np.asarray(z, dtype=float)
        return 2.0 * self.sigma1 * z + 3.0 * self.sigma2 * z**2


def boundary_lifting(a1: float, a2: float) -> LiftingPolynomial:
    """Lifting polynomial for the actuated right boundary."""
    d = a1 * a1 + a2 * a2
    if d <= 0:
        raise ValueError("need |a1| + |a2| > 0")
    return LiftingPolynomial(sigma1=(3.0 * a1 - a2) / d, sigma2=(a2 - 2.0 * a1) / d)


def analytic_eigensystem(
    p_const: float, q_const: float, n_max: int, grid_size: int = 400
) -> EigenSystem:
    """Closed-form eigensystem of the Dirichlet-Dirichlet constant problem.

    ``q_const`` is the growth-form reaction constant: the PDE reads
    dx/dt = p x'' + q_const x and lambda_n = n^2 pi^2 p - q_const with
    phi_n = sqrt(2) sin(n pi z).

    Parameters
    ----------
    grid_size : number of grid intervals (even; the grid has grid_size+1
        points).  Must satisfy 2*n_max <= grid_size so the stored samples
        resolve every retained mode.
    """
    if grid_size < 2 or n_max < 1:
        raise ValueError(f"invalid sizes: n_max={n_max}, grid_size={grid_size}")
    if grid_size % 2 != 0:
        raise ValueError("grid_size must be even (composite Simpson)")
    if p_const <= 0:
        raise ValueError("p must be positive")
    if 2 * n_max > grid_size:
        raise ValueError("grid too coarse: need 2*n_max <= grid_size")
    grid = uniform_grid(grid_size)
    problem = SLProblem.constant_dirichlet(p_const, q_const)
    rt2 = np.sqrt(2.0)
    pairs = []
    for n in range(1, n_max + 1):
        lam = n * n * np.pi * np.pi * p_const - q_const
        phi = rt2 * np.sin(n * np.pi * grid)
        dphi = rt2 * n * np.pi
        pairs.append(
            EigenPair(
                n=n,
                lam=lam,
                phi=phi,
                phi0=0.0,
                dphi0=dphi,
                phi1=0.0,
                dphi1=dphi * ((-1.0) ** n),
                max_abs_phi=rt2,
            )
        )
    return EigenSystem(
        problem=problem,
        grid=grid,
        pairs=tuple(pairs),
        analytic=AnalyticSpec(p=p_const, growth=q_const),
    )


# ---------------------------------------------------------------------------
# shooting solver
# ---------------------------------------------------------------------------


def _left_state(problem: SLProblem) -> tuple[float, float]:
    """Initial (f, p f') satisfying the left boundary condition."""
    p0 = problem.p(0.0)
    y1, y2 = -problem.b2, problem.b1 * p0
    # orient so the angle lies in [0, pi)
    if y1 < 0 or (y1 == 0 and y2 < 0):
        y1, y2 = -y1, -y2
    nrm = np.hypot(y1, y2)
    return y1 / nrm, y2 / nrm


def _right_angle(problem: SLProblem) -> float:
    """Pruefer angle theta_R in (0, pi] of the right boundary line."""
    p1 = problem.p(1.0)
    theta = np.arctan2(-problem.a2 / p1, problem.a1)
    theta = theta % np.pi
    if theta <= 0.0:
        theta += np.pi
    return theta


def _theta_end(problem: SLProblem, lam: float, rtol: float = 1e-8) -> float:
    """Pruefer angle at z = 1 for trial eigenvalue lam (bracketing only)."""
    y1, y2 = _left_state(problem)
    theta0 = np.arctan2(y1, y2) % np.pi

    def rhs(z, th):
        s, c = np.sin(th[0]), np.cos(th[0])
        return [c * c / problem.p(z) + (lam * problem.r(z) - problem.q(z)) * s * s]

    sol = solve_ivp(rhs, (0.0, 1.0), [theta0], rtol=rtol, atol=1e-10, method="DOP853")
    if not sol.success:
        raise NumericFailure(f"Pruefer integration failed at lambda={lam}")
    return float(sol.y[0, -1])


def _shoot_linear(problem: SLProblem, lam: float, grid: np.ndarray | None = None):
    """Integrate the linear ODE; returns endpoint data (and samples)."""
    y0 = list(_left_state(problem))

    def rhs(z, y):
        return [y[1] / problem.p(z), (problem.q(z) - lam * problem.r(z)) * y[0]]

    t_eval = grid if grid is not None else None
    sol = solve_ivp(
        rhs, (0.0, 1.0), y0, rtol=1e-12, atol=1e-14, method="DOP853", t_eval=t_eval, dense_output=False
    )
    if not sol.success:
        raise NumericFailure(f"shooting integration failed at lambda={lam}")
    return sol


def _boundary_residual(problem: SLProblem, lam: float) -> float:
    sol = _shoot_linear(problem, lam)
    f1 = sol.y[0, -1]
    df1 = sol.y[1, -1] / problem.p(1.0)
    return problem.a1 * f1 + problem.a2 * df1


def shoot_eigensystem(
    problem: SLProblem, n_max: int, grid_size: int = 400, tol: float = 1e-10
) -> EigenSystem:
    """First n_max eigenpairs by shooting with Pruefer-angle bracketing.

    Eigenvalue n is bracketed by bisecting the monotone map
    lam -> theta(1; lam) around its target angle, then polished as a root
    of the right-boundary residual of the linear shot.  Eigenfunctions are
    normalised in the r-weighted norm with the sign fixed so the first
    nonzero of (phi(0), phi'(0)) is positive; endpoint derivatives come
    from the integrator state, not from differencing grid samples.
    """
    if grid_size < 2 or n_max < 1:
        raise ValueError(f"invalid sizes: n_max={n_max}, grid_size={grid_size}")
    if grid_size % 2 != 0:
        raise ValueError("grid_size must be even (composite Simpson)")
    if tol <= 0:
        raise ValueError("tol must be positive")

    grid = uniform_grid(grid_size)
    theta_r = _right_angle(problem)
    probe = np.linspace(0.0, 1.0, 201)
    qr_min = float(np.min(problem.q(probe) / problem.r(probe)))
    pr_mean = float(np.mean(problem.p(probe) * problem.r(probe)))

    pairs: list[EigenPair] = []
    lam_floor = qr_min - 1.0
    for _ in range(60):
        if _theta_end(problem, lam_floor) < theta_r:
            break
        lam_floor -= 4.0 * (1.0 + abs(lam_floor))
    else:
        raise NumericFailure("could not find a lower spectral bound (index 1)")

    lam_lo = lam_floor
    theta_lo = _theta_end(problem, lam_lo)
    for n in range(1, n_max + 1):
        target = theta_r + (n - 1) * np.pi
        # expand an upper bracket
        step = max(pr_mean * np.pi**2 * (2 * n + 1), 10.0)
        lam_hi = lam_lo + step
        theta_hi = _theta_end(problem, lam_hi)
        expansions = 0
        while theta_hi <= target:
            lam_lo_n, theta_lo_n = lam_hi, theta_hi
            lam_hi += step
            step *= 2.0
            theta_hi = _theta_end(problem, lam_hi)
            expansions += 1
            if expansions > 60:
                raise NumericFailure(f"bracketing failure at eigenvalue index {n}")
        a, b = lam_lo, lam_hi
        th_a = _theta_end(problem, a)
        if th_a > target:
            raise NumericFailure(f"bracketing failure at eigenvalue index {n}")
        # bisect the angle until the bracket isolates exactly this crossing
        for _ in range(200):
            if (target - th_a < 0.45 * np.pi) and (_theta_end(problem, b) - target < 0.45 * np.pi):
                break
            mid = 0.5 * (a + b)
            th_mid = _theta_end(problem, mid)
            if th_mid < target:
                a, th_a = mid, th_mid
            else:
                b = mid
        else:
            raise NumericFailure(f"angle bisection stalled at eigenvalue index {n}")

        ra, rb = _boundary_residual(problem, a), _boundary_residual(problem, b)
        if ra == 0.0:
            lam_n = a
        elif rb == 0.0:
            lam_n = b
        elif np.sign(ra) == np.sign(rb):
            raise NumericFailure(f"residual bracket lost at eigenvalue index {n}")
        else:
            lam_n = brentq(
                lambda lv: _boundary_residual(problem, lv),
                a,
                b,
                xtol=tol,
                rtol=8.9e-16,
                maxiter=200,
            )

        sol = _shoot_linear(problem, lam_n, grid=grid)
        f = sol.y[0]
        pf = sol.y[1]
        w = simpson_weights(grid_size) * problem.r(grid)
        nrm = np.sqrt(np.dot(w, f * f))
        if not np.isfinite(nrm) or nrm == 0.0:
            raise NumericFailure(f"degenerate eigenfunction at index {n}")
        f = f / nrm
        pf = pf / nrm
        sgn = 1.0
        if abs(f[0]) > 1e-9 * np.max(np.abs(f)):
            sgn = np.sign(f[0])
        else:
            sgn = np.sign(pf[0])
        f *= sgn
        pf *= sgn
        pairs.append(
            EigenPair(
                n=n,
                lam=float(lam_n),
                phi=f,
                phi0=float(f[0]),
                dphi0=float(pf[0] / problem.p(0.0)),
                phi1=float(f[-1]),
                dphi1=float(pf[-1] / problem.p(1.0)),
                max_abs_phi=float(np.max(np.abs(f))),
            )
        )
        lam_lo, theta_lo = lam_n + tol * max(1.0, abs(lam_n)), None
        lam_lo = b  # resume the sweep above the isolated crossing

    lams = [pr.lam for pr in pairs]
    if any(l2 <= l1 for l1, l2 in zip(lams, lams[1:])):
        raise NumericFailure("computed eigenvalues are not strictly increasing")
    return EigenSystem(problem=problem, grid=grid, pairs=tuple(pairs))


# ---------------------------------------------------------------------------
# validation and gains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    """Diagnostics for an eigensystem: orthonormality and tail summability.

    ``partial_sums[j]`` accumulates lambda_n^{-1} max|phi_n| from the first
    index with positive eigenvalue up to n = first_positive + j.  The tail
    exponent is the fitted alpha in term_n ~ n^{-alpha}; alpha > 1 is the
    hallmark of a summable tail.  This is a report, not a certificate.
    """

    gram_max_deviation: float
    first_positive_index: int
    partial_sums: np.ndarray
    tail_exponent: float

    @property
    def looks_summable(self) -> bool:
        return self.tail_exponent > 1.0


def validate_eigensystem(eigsys: EigenSystem, n_tail: int | None = None) -> ValidationReport:
    """Orthonormality deviation plus partial sums of the spectral tail test."""
    lams = eigsys.lambdas
    pos = np.nonzero(lams > 0)[0]
    if len(pos) == 0:
        raise ValueError("no stored eigenvalue is positive; store more modes")
    first_pos = int(pos[0])
    if n_tail is not None:
        if n_tail < 1 or first_pos + n_tail > eigsys.n_max:
            raise ValueError(f"n_tail={n_tail} exceeds stored pairs past the first positive eigenvalue")
        last = first_pos + n_tail
    else:
        last = eigsys.n_max

    phi = eigsys.phi_matrix
    gram = (phi * eigsys.r_weights) @ phi.T
    gram_dev = float(np.max(np.abs(gram - np.eye(eigsys.n_max))))

    terms = np.array([pr.max_abs_phi / pr.lam for pr in eigsys.pairs[first_pos:last]])
    partial = np.cumsum(terms)
    ns = np.arange(first_pos + 1, last + 1, dtype=float)
    if len(ns) >= 3:
        slope = np.polyfit(np.log(ns), np.log(np.abs(terms)), 1)[0]
        alpha = -float(slope)
    else:
        alpha = float("nan")
    return ValidationReport(
        gram_max_deviation=gram_dev,
        first_positive_index=first_pos + 1,
        partial_sums=partial,
        tail_exponent=alpha,
    )


def input_gain(pair: EigenPair, problem: SLProblem) -> float:
    """Boundary input gain g_n = p(1)/(a1^2+a2^2) (a2 phi_n(1) - a1 phi_n'(1)).

    Nonzero for every true eigenpair: g_n = 0 would force both phi_n(1) and
    phi_n'(1) to vanish and with them the whole eigenfunction.
    """
    d = problem.a1**2 + problem.a2**2
    g = problem.p(1.0) / d * (problem.a2 * pair.phi1 - problem.a1 * pair.dphi1)
    if abs(g) < 1e-12:
        raise NumericFailure(f"vanishing input gain at mode {pair.n}: corrupted eigenpair")
    return float(g)
