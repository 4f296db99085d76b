"""Independent finite-difference reference solver (theta-scheme in time).

Second-order central differences in space with ghost-point elimination of
the separated boundary conditions; Crank-Nicolson (theta = 1/2) by
default.  This solver exists solely to cross-validate the spectral
simulator; it shares nothing with it beyond the problem definition.

Boundary convention under zero-order hold: the held input is right
continuous, so at each sampling instant the stored boundary sample of a
Dirichlet-actuated profile is reset to the freshly held value (an
L2-null change that keeps the first step of the hold consistent).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from . import _backend
from .errors import NumericFailure
from .modal_sim import SamplingSchedule, Trace
from .quadrature import simpson_weights, trapezoid_weights
from .sl_operator import SLProblem

__all__ = ["FDGrid", "fd_step", "simulate_fd", "compare_traces", "ComparisonReport"]


@dataclass(frozen=True)
class FDGrid:
    """Grid and stepping parameters: M interior points, spacing 1/(M+1)."""

    M: int
    dt: float
    theta: float = 0.5

    def __post_init__(self):
        if self.M < 3:
            raise ValueError("need at least 3 interior points")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError("theta must lie in [0, 1]")

    @property
    def h(self) -> float:
        return 1.0 / (self.M + 1)

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.M + 2)


@dataclass(frozen=True)
class _FDOperator:
    """Assembled spatial operator on the unknown nodes plus bookkeeping."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    force: np.ndarray  # multiplies the held input u
    left_unknown: bool
    right_unknown: bool
    a1: float
    grid: FDGrid

    def pack(self, profile: np.ndarray) -> np.ndarray:
        lo = 0 if self.left_unknown else 1
        hi = len(profile) if self.right_unknown else len(profile) - 1
        return np.array(profile[lo:hi], dtype=float)

    def unpack(self, xi: np.ndarray, u: float) -> np.ndarray:
        parts = []
        if not self.left_unknown:
            parts.append([0.0])
        parts.append(xi)
        if not self.right_unknown:
            parts.append([u / self.a1])
        return np.concatenate(parts)


@lru_cache(maxsize=32)
def _build_operator(problem: SLProblem, M: int) -> _FDOperator:
    grid = FDGrid(M=M, dt=1.0)  # dt unused at assembly
    h = grid.h
    z = grid.z
    p_half = problem.p((z[:-1] + z[1:]) / 2.0)  # p at half points, length M+1
    q = problem.q(z)
    r = problem.r(z)
    left_unknown = problem.b2 != 0.0
    right_unknown = problem.a2 != 0.0

    idx = np.arange(0 if left_unknown else 1, M + 2 if right_unknown else M + 1)
    n = len(idx)
    sub = np.zeros(n)
    diag = np.zeros(n)
    sup = np.zeros(n)
    force = np.zeros(n)
    for j, i in enumerate(idx):
        ri = r[i]
        if i == 0:
            pl, pr_ = problem.p(0.0), p_half[0]
            diag[j] = (-(pl + pr_) + 2.0 * h * (problem.b1 / problem.b2) * pl) / (h * h * ri) - q[i] / ri
            sup[j] = (pl + pr_) / (h * h * ri)
        elif i == M + 1:
            pl, pr_ = p_half[M], problem.p(1.0)
            sub[j] = (pl + pr_) / (h * h * ri)
            diag[j] = (-(pl + pr_) - 2.0 * h * (problem.a1 / problem.a2) * pr_) / (h * h * ri) - q[i] / ri
            force[j] = 2.0 * pr_ / (h * problem.a2 * ri)
        else:
            pl, pr_ = p_half[i - 1], p_half[i]
            sub[j] = pl / (h * h * ri)
            diag[j] = -(pl + pr_) / (h * h * ri) - q[i] / ri
            sup[j] = pr_ / (h * h * ri)
            if i == M and not right_unknown:
                force[j] = pr_ / (h * h * ri * problem.a1)
                sup[j] = 0.0
            if i == 1 and not left_unknown:
                sub[j] = 0.0  # left Dirichlet value is zero; nothing to carry
    if left_unknown:
        sub[0] = 0.0
    if right_unknown:
        sup[-1] = 0.0
    return _FDOperator(
        sub=sub,
        diag=diag,
        sup=sup,
        force=force,
        left_unknown=left_unknown,
        right_unknown=right_unknown,
        a1=problem.a1,
        grid=grid,
    )


def _theta_arrays(op: _FDOperator, dt: float, theta: float):
    lhs_lo = -theta * dt * op.sub
    lhs_di = 1.0 - theta * dt * op.diag
    lhs_up = -theta * dt * op.sup
    rhs_lo = (1.0 - theta) * dt * op.sub
    rhs_di = 1.0 + (1.0 - theta) * dt * op.diag
    rhs_up = (1.0 - theta) * dt * op.sup
    return lhs_lo, lhs_di, lhs_up, rhs_lo, rhs_di, rhs_up


def fd_step(profile: np.ndarray, u_hold: float, grid: FDGrid, problem: SLProblem) -> np.ndarray:
    """One theta-scheme step of r x_t = (p x')' - q x under a held input."""
    op = _build_operator(problem, grid.M)
    profile = np.asarray(profile, dtype=float)
    if len(profile) != grid.M + 2:
        raise ValueError(f"profile must have M+2 = {grid.M + 2} samples")
    lhs_lo, lhs_di, lhs_up, rhs_lo, rhs_di, rhs_up = _theta_arrays(op, grid.dt, grid.theta)
    xi = op.pack(profile)
    xi = _backend.theta_steps(
        xi, 1, rhs_lo, rhs_di, rhs_up, lhs_lo, lhs_di, lhs_up, grid.dt * op.force * u_hold
    )
    if not np.all(np.isfinite(xi)):
        raise NumericFailure("theta-scheme step produced non-finite values")
    return op.unpack(xi, u_hold)


def simulate_fd(
    problem: SLProblem,
    kernel: np.ndarray | None,
    schedule: SamplingSchedule,
    x0: np.ndarray,
    t_end: float,
    output_dt: float,
    grid: FDGrid,
    snapshots: bool = True,
) -> Trace:
    """Closed-loop run of the reference solver under sampled feedback.

    ``kernel`` holds samples of the feedback kernel on the solver grid
    (u = integral kernel * x dz via trapezoid); None means zero feedback.
    Sampling gaps and output_dt must be integer multiples of dt.
    """
    dt = grid.dt
    z = grid.z
    x0 = np.asarray(x0, dtype=float)
    if len(x0) != grid.M + 2:
        raise ValueError(f"x0 must have M+2 = {grid.M + 2} samples")
    total_steps = int(round(t_end / dt))
    if abs(total_steps * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError("t_end must be an integer multiple of dt")
    out_every = int(round(output_dt / dt))
    if out_every < 1 or abs(out_every * dt - output_dt) > 1e-9 * output_dt:
        raise ValueError("output_dt must be an integer multiple of dt")
    taus = schedule.times_until(t_end)
    sample_steps = set()
    for tau in taus[1:]:
        k = int(round(tau / dt))
        if abs(k * dt - tau) > 1e-9 * max(dt, tau):
            raise ValueError("sampling instants must be integer multiples of dt")
        sample_steps.add(k)

    wq = trapezoid_weights(grid.M + 1)
    rw = wq * problem.r(z)

    def fb(profile: np.ndarray) -> float:
        if kernel is None:
            return 0.0
        return float(np.dot(wq, kernel * profile))

    op = _build_operator(problem, grid.M)
    lhs_lo, lhs_di, lhs_up, rhs_lo, rhs_di, rhs_up = _theta_arrays(op, dt, grid.theta)

    x = x0.copy()
    rows_t, rows_norm, rows_u = [0.0], [float(np.sqrt(np.dot(rw, x0 * x0)))], []
    snaps = {0.0: x0.copy()}
    u = fb(x)
    rows_u.append(u)
    if not op.right_unknown:
        x[-1] = u / op.a1
    xi = op.pack(x)

    step = 0
    while step < total_steps:
        # advance in one kernel call to the next event (sample or output)
        next_events = [s for s in (min((s for s in sample_steps if s > step), default=None),) if s]
        nxt = min(
            [total_steps]
            + ([next_events[0]] if next_events else [])
            + [((step // out_every) + 1) * out_every]
        )
        nsteps = nxt - step
        xi = _backend.theta_steps(
            xi, nsteps, rhs_lo, rhs_di, rhs_up, lhs_lo, lhs_di, lhs_up, dt * op.force * u
        )
        step = nxt
        x = op.unpack(xi, u)
        t = step * dt
        emit = step % out_every == 0 or step == total_steps
        is_sample = step in sample_steps
        if emit:
            rows_t.append(t)
            rows_norm.append(float(np.sqrt(max(np.dot(rw, x * x), 0.0))))
            if snapshots:
                snaps[t] = x.copy()
        if is_sample:
            u = fb(x)
            if not op.right_unknown:
                x[-1] = u / op.a1
                xi = op.pack(x)
        if emit:
            rows_u.append(u)
    if not np.all(np.isfinite(rows_norm)):
        raise NumericFailure("reference solve diverged")
    return Trace(
        t=np.array(rows_t),
        norm_r=np.array(rows_norm),
        u=np.array(rows_u[: len(rows_t)]),
        snapshots=snaps,
        grid=z,
        metadata={
            "solver": "theta-scheme reference",
            "M": grid.M,
            "dt": dt,
            "theta": grid.theta,
            "schedule": schedule.descriptor(),
        },
    )


@dataclass
class ComparisonReport:
    """Per-time relative L2 differences between two traces."""

    times: np.ndarray
    rel_snapshot: np.ndarray
    rel_norm: np.ndarray
    max_rel_snapshot: float = field(init=False)
    t_at_max: float = field(init=False)
    max_rel_norm: float = field(init=False)

    def __post_init__(self):
        if len(self.rel_snapshot):
            i = int(np.argmax(self.rel_snapshot))
            self.max_rel_snapshot = float(self.rel_snapshot[i])
            self.t_at_max = float(self.times[i])
        else:
            self.max_rel_snapshot = float("nan")
            self.t_at_max = float("nan")
        self.max_rel_norm = float(np.max(self.rel_norm)) if len(self.rel_norm) else float("nan")


def compare_traces(a: Trace, b: Trace) -> ComparisonReport:
    """Relative L2 differences of snapshots and norms at shared times.

    Profiles of ``b`` are resampled onto ``a``'s grid with a cubic spline
    when the grids differ.
    """
    if len(a.t) != len(b.t) or np.max(np.abs(a.t - b.t)) > 1e-9 * max(1.0, float(a.t[-1])):
        raise ValueError("traces do not share output times")
    rel_norm = np.abs(a.norm_r - b.norm_r) / np.maximum(np.abs(b.norm_r), 1e-300)

    times, rels = [], []
    if a.snapshots and b.snapshots:
        ga = a.grid
        m = len(ga) - 1
        w = simpson_weights(m) if m % 2 == 0 else trapezoid_weights(m)
        for t in sorted(a.snapshots):
            tb = min(b.snapshots, key=lambda s: abs(s - t))
            if abs(tb - t) > 1e-9 * max(1.0, t):
                continue
            pa = a.snapshots[t]
            pb = b.snapshots[tb]
            if b.grid is not None and (len(b.grid) != len(ga) or np.any(b.grid != ga)):
                pb = CubicSpline(b.grid, pb)(ga)
            num = float(np.sqrt(max(np.dot(w, (pa - pb) ** 2), 0.0)))
            den = float(np.sqrt(max(np.dot(w, pb**2), 0.0)))
            times.append(t)
            rels.append(num / max(den, 1e-300))
    return ComparisonReport(
        times=np.array(times), rel_snapshot=np.array(rels), rel_norm=rel_norm
    )
