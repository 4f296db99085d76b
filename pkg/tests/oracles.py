"""Independent reference computations used to freeze expected test values.

These deliberately avoid the code paths they check: classical RK4 for the
scalar hold ODE, dense matrix exponentials for sampled linear systems,
and plain quadrature summation.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm


def rk4_hold_ode(x0, lam, g, u, dt, n_sub=8192):
    """RK4 integration of x' = -lam x + g u over [0, dt], u constant.

    Vectorized over case arrays; n_sub = 8192 puts the truncation error
    far below 1e-12 relative for |lam| <= 10, dt <= 1.
    """
    x0 = np.asarray(x0, dtype=float)
    lam = np.asarray(lam, dtype=float)
    g = np.asarray(g, dtype=float)
    u = np.asarray(u, dtype=float)
    dt = np.asarray(dt, dtype=float)
    h = dt / n_sub
    x = x0.astype(float).copy()
    f = lambda xv: -lam * xv + g * u
    for _ in range(n_sub):
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def sampled_linear_system(lambdas, g, k, taus, x0, t_eval):
    """Exact sampled trajectory of the retained finite-dimensional loop.

    x' = diag(-lambda) x + g u with u = k' x(tau_i) held on [tau_i,
    tau_{i+1}); propagation over each interval uses the matrix exponential
    of the augmented (state, input) system.  Returns the states at t_eval.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    g = np.asarray(g, dtype=float)
    k = np.asarray(k, dtype=float)
    m = len(lambdas)
    A_aug = np.zeros((m + 1, m + 1))
    A_aug[:m, :m] = np.diag(-lambdas)
    A_aug[:m, m] = g
    taus = np.asarray(taus, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    out = np.empty((len(t_eval), m))
    state = np.asarray(x0, dtype=float).copy()
    u = float(k @ state)
    idx_tau = 1
    t_cur = 0.0
    for j, te in enumerate(t_eval):
        while idx_tau < len(taus) and taus[idx_tau] <= te + 1e-18:
            dt = taus[idx_tau] - t_cur
            if dt > 0:
                z = expm(A_aug * dt) @ np.append(state, u)
                state = z[:m]
            t_cur = taus[idx_tau]
            u = float(k @ state)
            idx_tau += 1
        dt = te - t_cur
        if dt > 0:
            z = expm(A_aug * dt) @ np.append(state, u)
            state = z[:m]
            t_cur = te
        out[j] = state
    return out
