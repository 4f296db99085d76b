"""Trace post-processing: decay fits, empirical thresholds, ISS checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BracketError, DegenerateTrace
from .modal_sim import SamplingSchedule, Trace, make_schedule

__all__ = [
    "DecayFit",
    "fit_decay",
    "DestabilizationResult",
    "destabilization_search",
    "IssCheck",
    "verify_iss_estimate",
]

NORM_FLOOR = 1e-13


@dataclass(frozen=True)
class DecayFit:
    """Log-linear envelope fit: norm(t) <= G_est e^{-c_est t} norm(0)."""

    G_est: float
    c_est: float
    fit_window: tuple[float, float]
    residual: float


def fit_decay(trace: Trace, t_lo: float = 0.0) -> DecayFit:
    """Least-squares decay rate of log norm_r over rows past t_lo.

    Rows with norms at the floating floor (1e-13 relative to the initial
    norm) are excluded; c_est is minus the fitted slope and G_est the
    smallest envelope constant valid on every usable row of the trace.
    """
    t = np.asarray(trace.t, dtype=float)
    nr = np.asarray(trace.norm_r, dtype=float)
    n0 = nr[0]
    if n0 <= 0 or not np.isfinite(n0):
        raise DegenerateTrace("initial norm is zero or non-finite")
    usable = np.isfinite(nr) & (nr > NORM_FLOOR * n0)
    if not np.any(usable):
        raise DegenerateTrace("all norms sit at the floating-point floor")
    sel = usable & (t >= t_lo)
    if np.count_nonzero(sel) < 10:
        raise ValueError("need at least 10 usable rows past t_lo")
    ts = t[sel]
    logs = np.log(nr[sel])
    slope, intercept = np.polyfit(ts, logs, 1)
    resid = float(np.sqrt(np.mean((logs - (slope * ts + intercept)) ** 2)))
    c_est = -float(slope)
    ratios = nr[usable] * np.exp(c_est * t[usable]) / n0
    G_est = float(max(np.max(ratios), 1.0))
    return DecayFit(
        G_est=G_est, c_est=c_est, fit_window=(float(ts[0]), float(ts[-1])), residual=resid
    )


@dataclass(frozen=True)
class DestabilizationResult:
    """Empirical stability threshold of the sampled loop in the gap bound."""

    T_emp: float
    T_lo: float
    T_hi: float
    ratio: float | None
    n_simulations: int


def destabilization_search(
    run_at: Callable[[SamplingSchedule], Trace],
    schedule_kind: str,
    T_range: tuple[float, float],
    horizon: float,
    seed: int = 0,
    T_star: float | None = None,
    rel_tol: float = 1e-3,
) -> DestabilizationResult:
    """Bisect the sup-gap bound for the loss of the boundedness predicate.

    ``run_at(schedule)`` simulates to the horizon and returns a Trace; a
    run counts as stable when norm(horizon) < norm(0) (robust to transient
    overshoot).  The bracket must be stable at T_range[0] and unstable at
    T_range[1]; this is verified before bisecting.  With T_star given, the
    conservatism ratio T_emp / T_star is filled in.
    """
    t_lo, t_hi = T_range
    if not (0 < t_lo < t_hi):
        raise ValueError("need 0 < T_lo < T_hi")

    count = 0

    def stable(T: float) -> bool:
        nonlocal count
        count += 1
        trace = run_at(make_schedule(schedule_kind, T, seed=seed))
        n_end = trace.norm_r[-1]
        return bool(np.isfinite(n_end) and n_end < trace.norm_r[0])

    if not stable(t_lo):
        raise BracketError(f"low end T = {t_lo:g} is not stable; widen the bracket downward")
    if stable(t_hi):
        raise BracketError(f"high end T = {t_hi:g} is not unstable; widen the bracket upward")
    lo, hi = t_lo, t_hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    T_emp = 0.5 * (lo + hi)
    ratio = (T_emp / T_star) if T_star is not None else None
    return DestabilizationResult(T_emp=T_emp, T_lo=lo, T_hi=hi, ratio=ratio, n_simulations=count)


@dataclass(frozen=True)
class IssCheck:
    """Pointwise check of the disturbance-to-state estimate along a trace."""

    ok: bool
    min_slack: float
    max_violation: float
    slack: np.ndarray


def verify_iss_estimate(trace: Trace, G: float, sigma: float, gamma: float) -> IssCheck:
    """Check ||y[t]|| <= G e^{-sigma t} ||y[0]|| + gamma sup_{s<=t}(|v(s)| e^{-sigma(t-s)}).

    Needs the transformed-state norms and the input-mismatch diagnostic on
    the trace; the running sup is maintained incrementally over rows.
    """
    if trace.y_norm is None or trace.v is None:
        raise ValueError("trace lacks transformed norms or v diagnostics")
    t = np.asarray(trace.t, dtype=float)
    y = np.asarray(trace.y_norm, dtype=float)
    v = np.asarray(trace.v, dtype=float)
    y0 = y[0]
    run = 0.0
    slack = np.empty(len(t))
    for i in range(len(t)):
        if i > 0:
            run *= np.exp(-sigma * (t[i] - t[i - 1]))
        run = max(run, abs(v[i]))
        rhs = G * np.exp(-sigma * t[i]) * y0 + gamma * run
        slack[i] = rhs - y[i]
    min_slack = float(np.min(slack))
    return IssCheck(
        ok=bool(min_slack >= 0.0),
        min_slack=min_slack,
        max_violation=float(max(0.0, -min_slack)),
        slack=slack,
    )
