# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot loops: sampled modal advance and theta-scheme stepping.

Same contracts as ``_kernels_py``; see that module for the semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1

from .errors import NumericFailure

cnp.import_array()

BACKEND_NAME = "compiled"


def advance_modal(x, u, lam, g, fb, double fb_tail, dts, kinds, anchor_x, anchor_uprev):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.array(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lamv = np.ascontiguousarray(lam, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fbv = np.ascontiguousarray(fb, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dtv = np.ascontiguousarray(dts, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] kv = np.ascontiguousarray(kinds, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] av = np.array(anchor_x, dtype=np.float64)

    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t m = dtv.shape[0]
    cdef Py_ssize_t n_out = 0
    cdef Py_ssize_t i, j
    for i in range(m):
        if kv[i] & 2:
            n_out += 1

    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_x = np.empty((n_out, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_anchor = np.empty((n_out, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_useg = np.empty(n_out)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_uprev = np.empty(n_out)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out_is_sample = np.zeros(n_out, dtype=np.uint8)

    cdef double uc = u
    cdef double uprev = anchor_uprev
    cdef double dt, a, pn, unew
    cdef Py_ssize_t k = 0
    cdef int overflow = 0

    for i in range(m):
        dt = dtv[i]
        if dt > 0.0:
            for j in range(n):
                a = lamv[j] * dt
                if a < -700.0:
                    overflow = 1
                    break
                if lamv[j] != 0.0:
                    pn = -expm1(-a) / lamv[j]
                else:
                    pn = dt
                xv[j] = exp(-a) * xv[j] + gv[j] * (uc * pn)
            if overflow:
                raise NumericFailure(
                    "unstable mode exploded past float range (lam*dt < -700)")
        if kv[i] & 2:
            for j in range(n):
                out_x[k, j] = xv[j]
                out_anchor[k, j] = av[j]
            out_useg[k] = uc
            out_uprev[k] = uprev
            out_is_sample[k] = 1 if (kv[i] & 1) else 0
            k += 1
        if kv[i] & 1:
            unew = fb_tail * uc
            for j in range(n):
                unew += fbv[j] * xv[j]
            for j in range(n):
                av[j] = xv[j]
            uprev = uc
            uc = unew

    rows = {
        "x": out_x,
        "anchor": out_anchor,
        "u_seg": out_useg,
        "u_prev": out_uprev,
        "is_sample": out_is_sample,
    }
    return xv, uc, av, uprev, rows


def theta_steps(xi, Py_ssize_t nsteps, rhs_lo, rhs_di, rhs_up, lhs_lo, lhs_di, lhs_up, force):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.array(xi, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rlo = np.ascontiguousarray(rhs_lo, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rdi = np.ascontiguousarray(rhs_di, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rup = np.ascontiguousarray(rhs_up, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] llo = np.ascontiguousarray(lhs_lo, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ldi = np.ascontiguousarray(lhs_di, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lup = np.ascontiguousarray(lhs_up, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] fv = np.ascontiguousarray(force, dtype=np.float64)

    cdef Py_ssize_t m = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cp = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] inv_d = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dp = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rhs = np.empty(m)
    cdef Py_ssize_t j, s
    cdef double denom

    inv_d[0] = 1.0 / ldi[0]
    cp[0] = lup[0] * inv_d[0]
    for j in range(1, m):
        denom = ldi[j] - llo[j] * cp[j - 1]
        if denom == 0.0:
            raise NumericFailure("singular tridiagonal system in theta-scheme step")
        inv_d[j] = 1.0 / denom
        cp[j] = lup[j] * inv_d[j]

    for s in range(nsteps):
        rhs[0] = rdi[0] * x[0] + rup[0] * x[1] + fv[0]
        for j in range(1, m - 1):
            rhs[j] = rlo[j] * x[j - 1] + rdi[j] * x[j] + rup[j] * x[j + 1] + fv[j]
        rhs[m - 1] = rlo[m - 1] * x[m - 2] + rdi[m - 1] * x[m - 1] + fv[m - 1]
        dp[0] = rhs[0] * inv_d[0]
        for j in range(1, m):
            dp[j] = (rhs[j] - llo[j] * dp[j - 1]) * inv_d[j]
        x[m - 1] = dp[m - 1]
        for j in range(m - 2, -1, -1):
            x[j] = dp[j] - cp[j] * x[j + 1]
    return x
