"""Compiled per-row kernels for beam propagation and superposition.

The batched numpy path in beam_propagator is memory-bound on the stacked
Riccati arithmetic; these kernels run the same formulas row by row with numba
so that collocation studies with thousands of beam simulations stay within
desk-scale budgets.  Everything is single-threaded and allocation-free in the
inner loop, so results are deterministic and independent of chunking and
thread counts.

Speed models are dispatched by an integer id with one packed parameter row
per beam:

    0  constant speed            params (c,)
    1  double-bump 1D speed      params (b,)
    2  lens 2D speed             params (a, b, g)
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


MODEL_CONSTANT = 0
MODEL_DOUBLE_BUMP = 1
MODEL_LENS = 2


@njit(cache=True)
def _speed_1d(model, par, x1):
    if model == MODEL_CONSTANT:
        return par[0], 0.0, 0.0
    # double bump: 1 + (exp(-(x-1)^2) + b*exp(-(x+1)^2)) / 2
    b = par[0]
    e1 = math.exp(-((x1 - 1.0) ** 2))
    e2 = math.exp(-((x1 + 1.0) ** 2))
    c = 1.0 + 0.5 * (e1 + b * e2)
    dc = 0.5 * (-2.0 * (x1 - 1.0) * e1 - 2.0 * b * (x1 + 1.0) * e2)
    d2c = 0.5 * ((4.0 * (x1 - 1.0) ** 2 - 2.0) * e1
                 + b * (4.0 * (x1 + 1.0) ** 2 - 2.0) * e2)
    return c, dc, d2c


@njit(cache=True)
def _speed_2d(model, par, x1, x2):
    if model == MODEL_CONSTANT:
        return par[0], 0.0, 0.0, 0.0, 0.0, 0.0
    # lens: 1 - a*exp(-(b*x1^2 - g*x2^2))
    a, b, g = par[0], par[1], par[2]
    e = math.exp(-(b * x1 * x1 - g * x2 * x2))
    c = 1.0 - a * e
    d1 = 2.0 * a * b * x1 * e
    d2 = -2.0 * a * g * x2 * e
    h11 = -a * (4.0 * b * b * x1 * x1 - 2.0 * b) * e
    h22 = -a * (4.0 * g * g * x2 * x2 + 2.0 * g) * e
    h12 = 4.0 * a * b * g * x1 * x2 * e
    return c, d1, d2, h11, h12, h22


@njit(cache=True)
def _stage_1d(model, par, sigma, q1, p1, m, a0):
    pn = abs(p1)
    c, g1, h11 = _speed_1d(model, par, q1)
    inv = 1.0 / pn
    dq1 = sigma * c * inv * p1
    dp1 = -sigma * pn * g1
    mp = m * p1
    alpha = c * inv
    beta = c * inv * inv * inv
    dm = sigma * (pn * h11 + 2.0 * g1 * mp * inv + alpha * (m * m) - beta * (mp * mp))
    da = sigma * 0.5 * inv * (c * m - g1 * p1 - c * (p1 * mp) * inv * inv) * a0
    return dq1, dp1, dm, da


@njit(cache=True)
def _stage_2d(model, par, sigma, q1, q2, p1, p2, m00, m01, m11, a0):
    pn = math.sqrt(p1 * p1 + p2 * p2)
    c, g1, g2, h11, h12, h22 = _speed_2d(model, par, q1, q2)
    inv = 1.0 / pn
    dq1 = sigma * c * inv * p1
    dq2 = sigma * c * inv * p2
    dp1 = -sigma * pn * g1
    dp2 = -sigma * pn * g2
    mp1 = m00 * p1 + m01 * p2
    mp2 = m01 * p1 + m11 * p2
    mm00 = m00 * m00 + m01 * m01
    mm01 = m01 * (m00 + m11)
    mm11 = m01 * m01 + m11 * m11
    alpha = c * inv
    beta = c * inv * inv * inv
    dm00 = sigma * (pn * h11 + 2.0 * g1 * mp1 * inv + alpha * mm00 - beta * mp1 * mp1)
    dm01 = sigma * (pn * h12 + (g1 * mp2 + g2 * mp1) * inv + alpha * mm01 - beta * mp1 * mp2)
    dm11 = sigma * (pn * h22 + 2.0 * g2 * mp2 * inv + alpha * mm11 - beta * mp2 * mp2)
    tr = m00 + m11
    pmp = p1 * mp1 + p2 * mp2
    da = sigma * 0.5 * inv * (c * tr - (g1 * p1 + g2 * p2) - c * pmp * inv * inv) * a0
    return dq1, dq2, dp1, dp2, dm00, dm01, dm11, da


@njit(cache=True)
def rk4_1d(model, params, q, p, m, a0, mode, dts, p_floor, track_drift):
    """In-place RK4 loop over all rows; returns (min_im, drift, fail, fail_row).

    fail codes: 0 ok, 1 degenerate slowness, 2 Im M lost positivity.
    """
    B = q.shape[0]
    n_steps = dts.shape[0]
    min_im = np.empty(B)
    drift = np.zeros(B)
    fail = 0
    fail_row = -1
    for i in range(B):
        par = params[i]
        sigma = mode[i]
        q1 = q[i, 0]
        p1 = p[i, 0]
        mi = m[i]
        a = a0[i]
        floor = p_floor[i]
        lo = mi.imag
        h0 = 1.0
        if track_drift:
            c0, _, _ = _speed_1d(model, par, q1)
            h0 = c0 * abs(p1)
        for s in range(n_steps):
            if abs(p1) < floor:
                fail = 1
                fail_row = i
                break
            dt = dts[s]
            k1 = _stage_1d(model, par, sigma, q1, p1, mi, a)
            k2 = _stage_1d(model, par, sigma, q1 + 0.5 * dt * k1[0],
                           p1 + 0.5 * dt * k1[1], mi + 0.5 * dt * k1[2],
                           a + 0.5 * dt * k1[3])
            k3 = _stage_1d(model, par, sigma, q1 + 0.5 * dt * k2[0],
                           p1 + 0.5 * dt * k2[1], mi + 0.5 * dt * k2[2],
                           a + 0.5 * dt * k2[3])
            k4 = _stage_1d(model, par, sigma, q1 + dt * k3[0],
                           p1 + dt * k3[1], mi + dt * k3[2], a + dt * k3[3])
            q1 = q1 + dt * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
            p1 = p1 + dt * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
            mi = mi + dt * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0
            a = a + dt * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]) / 6.0
            lo = min(lo, mi.imag)
            if mi.imag <= 0.0:
                fail = 2
                fail_row = i
                break
            if track_drift:
                c1, _, _ = _speed_1d(model, par, q1)
                d = abs(c1 * abs(p1) - h0) / abs(h0)
                if d > drift[i]:
                    drift[i] = d
        if fail != 0:
            break
        q[i, 0] = q1
        p[i, 0] = p1
        m[i] = mi
        a0[i] = a
        min_im[i] = lo
    return min_im, drift, fail, fail_row


@njit(cache=True)
def rk4_2d(model, params, q, p, m00, m01, m11, a0, mode, dts, p_floor, track_drift):
    B = q.shape[0]
    n_steps = dts.shape[0]
    min_im = np.empty(B)
    drift = np.zeros(B)
    fail = 0
    fail_row = -1
    for i in range(B):
        par = params[i]
        sigma = mode[i]
        q1, q2 = q[i, 0], q[i, 1]
        p1, p2 = p[i, 0], p[i, 1]
        a00, a01, a11 = m00[i], m01[i], m11[i]
        a = a0[i]
        floor = p_floor[i]
        half_tr = 0.5 * (a00.imag + a11.imag)
        rad = math.sqrt(0.25 * (a00.imag - a11.imag) ** 2 + a01.imag ** 2)
        lo = half_tr - rad
        h0 = 1.0
        if track_drift:
            c0 = _speed_2d(model, par, q1, q2)[0]
            h0 = c0 * math.sqrt(p1 * p1 + p2 * p2)
        for s in range(n_steps):
            if math.sqrt(p1 * p1 + p2 * p2) < floor:
                fail = 1
                fail_row = i
                break
            dt = dts[s]
            k1 = _stage_2d(model, par, sigma, q1, q2, p1, p2, a00, a01, a11, a)
            k2 = _stage_2d(model, par, sigma,
                           q1 + 0.5 * dt * k1[0], q2 + 0.5 * dt * k1[1],
                           p1 + 0.5 * dt * k1[2], p2 + 0.5 * dt * k1[3],
                           a00 + 0.5 * dt * k1[4], a01 + 0.5 * dt * k1[5],
                           a11 + 0.5 * dt * k1[6], a + 0.5 * dt * k1[7])
            k3 = _stage_2d(model, par, sigma,
                           q1 + 0.5 * dt * k2[0], q2 + 0.5 * dt * k2[1],
                           p1 + 0.5 * dt * k2[2], p2 + 0.5 * dt * k2[3],
                           a00 + 0.5 * dt * k2[4], a01 + 0.5 * dt * k2[5],
                           a11 + 0.5 * dt * k2[6], a + 0.5 * dt * k2[7])
            k4 = _stage_2d(model, par, sigma,
                           q1 + dt * k3[0], q2 + dt * k3[1],
                           p1 + dt * k3[2], p2 + dt * k3[3],
                           a00 + dt * k3[4], a01 + dt * k3[5],
                           a11 + dt * k3[6], a + dt * k3[7])
            q1 = q1 + dt * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0
            q2 = q2 + dt * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0
            p1 = p1 + dt * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]) / 6.0
            p2 = p2 + dt * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]) / 6.0
            a00 = a00 + dt * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]) / 6.0
            a01 = a01 + dt * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5]) / 6.0
            a11 = a11 + dt * (k1[6] + 2.0 * k2[6] + 2.0 * k3[6] + k4[6]) / 6.0
            a = a + dt * (k1[7] + 2.0 * k2[7] + 2.0 * k3[7] + k4[7]) / 6.0
            half_tr = 0.5 * (a00.imag + a11.imag)
            rad = math.sqrt(0.25 * (a00.imag - a11.imag) ** 2 + a01.imag ** 2)
            eig = half_tr - rad
            lo = min(lo, eig)
            if eig <= 0.0:
                fail = 2
                fail_row = i
                break
            if track_drift:
                c1 = _speed_2d(model, par, q1, q2)[0]
                d = abs(c1 * math.sqrt(p1 * p1 + p2 * p2) - h0) / abs(h0)
                if d > drift[i]:
                    drift[i] = d
        if fail != 0:
            break
        q[i, 0], q[i, 1] = q1, q2
        p[i, 0], p[i, 1] = p1, p2
        m00[i], m01[i], m11[i] = a00, a01, a11
        a0[i] = a
        min_im[i] = lo
    return min_im, drift, fail, fail_row


@njit(cache=True)
def superpose_1d(pts, q, p, m, phi0, a0, eps, prefactor, trunc_log, truncate):
    P = pts.shape[0]
    B = q.shape[0]
    out = np.empty(P, dtype=np.complex128)
    for g in range(P):
        x1 = pts[g, 0]
        acc = 0.0 + 0.0j
        for j in range(B):
            d1 = x1 - q[j, 0]
            lin = d1 * p[j, 0]
            quad = 0.5 * d1 * d1 * m[j]
            qim = quad.imag
            if truncate and qim > eps * trunc_log:
                continue
            theta = (phi0[j] + lin + quad.real) / eps
            gauss = math.exp(-qim / eps)
            acc += a0[j] * gauss * complex(math.cos(theta), math.sin(theta))
        out[g] = prefactor * acc
    return out


@njit(cache=True)
def superpose_2d(pts, q, p, m00, m01, m11, phi0, a0, eps, prefactor, trunc_log, truncate):
    P = pts.shape[0]
    B = q.shape[0]
    out = np.empty(P, dtype=np.complex128)
    for g in range(P):
        x1, x2 = pts[g, 0], pts[g, 1]
        acc = 0.0 + 0.0j
        for j in range(B):
            d1 = x1 - q[j, 0]
            d2 = x2 - q[j, 1]
            lin = d1 * p[j, 0] + d2 * p[j, 1]
            quad = 0.5 * (d1 * d1 * m00[j] + 2.0 * d1 * d2 * m01[j] + d2 * d2 * m11[j])
            qim = quad.imag
            if truncate and qim > eps * trunc_log:
                continue
            theta = (phi0[j] + lin + quad.real) / eps
            gauss = math.exp(-qim / eps)
            acc += a0[j] * gauss * complex(math.cos(theta), math.sin(theta))
        out[g] = prefactor * acc
    return out
