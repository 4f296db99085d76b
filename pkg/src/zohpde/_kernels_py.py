"""Pure-NumPy fallback for the hot loops.

Two kernels dominate runtime: the hold-by-hold advance of the modal
closed loop (exact exponential update per segment) and the theta-scheme
time stepping of the finite-difference reference solver.  The compiled
extension (``_kernels.pyx``) implements the same contracts; this module
is the always-available fallback and the executable specification used
by the backend parity tests.

Contract of ``advance_modal``: the timeline is a sequence of segments.
Segment i advances the state over ``dts[i]`` under the currently held
input, then acts on ``kinds[i]``: bit 2 emits an output row (state, the
state at the most recent sampling instant, the input held during the
segment, and the input held before that sampling instant), bit 1 takes a
sample (recompute the held input from the state).  Rows at instants that
are both output and sample are emitted before the input switches, which
is the left-limit convention matching the L2-continuity of the state.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericFailure

BACKEND_NAME = "python"


def advance_modal(x, u, lam, g, fb, fb_tail, dts, kinds, anchor_x, anchor_uprev):
    """Advance the sampled modal closed loop over a prepared timeline.

    Parameters
    ----------
    x : (n,) state at the start (modified copy returned).
    u : input currently held.
    lam, g : modal decay rates and input gains.
    fb, fb_tail : feedback functional; a sample sets
        u_new = fb @ x + fb_tail * u_old.
    dts, kinds : (m,) segment durations and event bitmasks (1 = sample,
        2 = output row) acting at each segment's end.
    anchor_x, anchor_uprev : state at the most recent sampling instant and
        the input held just before it.

    Returns
    -------
    (x, u, anchor_x, anchor_uprev, rows) where rows is a dict of arrays:
    ``x`` (k, n), ``anchor`` (k, n), ``u_seg`` (k,), ``u_prev`` (k,),
    ``is_sample`` (k,).
    """
    x = np.array(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    g = np.asarray(g, dtype=float)
    fb = np.asarray(fb, dtype=float)
    anchor_x = np.array(anchor_x, dtype=float)
    n_out = int(np.count_nonzero(np.asarray(kinds) & 2))
    n = len(x)
    out_x = np.empty((n_out, n))
    out_anchor = np.empty((n_out, n))
    out_useg = np.empty(n_out)
    out_uprev = np.empty(n_out)
    out_is_sample = np.zeros(n_out, dtype=np.uint8)
    k = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(len(dts)):
            dt = dts[i]
            if dt > 0.0:
                a = lam * dt
                if np.any(a < -700.0):
                    raise NumericFailure(
                        "unstable mode exploded past float range (lam*dt < -700)"
                    )
                decay = np.exp(-a)
                pn = np.where(lam != 0.0, -np.expm1(-a) / np.where(lam == 0.0, 1.0, lam), dt)
                x = decay * x + g * (u * pn)
            kind = kinds[i]
            if kind & 2:
                out_x[k] = x
                out_anchor[k] = anchor_x
                out_useg[k] = u
                out_uprev[k] = anchor_uprev
                out_is_sample[k] = 1 if (kind & 1) else 0
                k += 1
            if kind & 1:
                u_new = float(fb @ x) + fb_tail * u
                anchor_x = x.copy()
                anchor_uprev = u
                u = u_new
    rows = {
        "x": out_x,
        "anchor": out_anchor,
        "u_seg": out_useg,
        "u_prev": out_uprev,
        "is_sample": out_is_sample,
    }
    return x, u, anchor_x, anchor_uprev, rows


def theta_steps(xi, nsteps, rhs_lo, rhs_di, rhs_up, lhs_lo, lhs_di, lhs_up, force):
    """Run ``nsteps`` theta-scheme steps on the interior unknown vector.

    Per step: rhs = tridiag(rhs_lo, rhs_di, rhs_up) @ xi + force, then
    solve tridiag(lhs_lo, lhs_di, lhs_up) xi_new = rhs.  ``force`` holds
    the boundary and input contributions, constant across the batch.
    """
    from scipy.linalg import solve_banded

    xi = np.array(xi, dtype=float)
    m = len(xi)
    ab = np.zeros((3, m))
    ab[0, 1:] = lhs_up[:-1]
    ab[1, :] = lhs_di
    ab[2, :-1] = lhs_lo[1:]
    rhs = np.empty(m)
    try:
        for _ in range(nsteps):
            rhs[:] = rhs_di * xi + force
            rhs[:-1] += rhs_up[:-1] * xi[1:]
            rhs[1:] += rhs_lo[1:] * xi[:-1]
            xi = solve_banded((1, 1), ab, rhs, overwrite_b=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure("singular tridiagonal system in theta-scheme step") from exc
    return xi
