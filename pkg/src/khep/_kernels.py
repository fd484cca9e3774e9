"""Compiled numerical kernels.

Everything that runs inside tight integration loops lives here as
numba-jitted functions over raw float64 arrays. The public modules wrap
these with typed containers; the formulas appear exactly once, in this
file.

State layout everywhere: ``s = [x, y, z, px, py, pz]``.
"""

import math

import numpy as np
from numba import njit

EIGHT_PI = 8.0 * math.pi

# Gauss-Legendre 2-stage collocation coefficients (order 4).
_SQ3 = math.sqrt(3.0)
_A11 = 0.25
_A12 = 0.25 - _SQ3 / 6.0
_A21 = 0.25 + _SQ3 / 6.0
_A22 = 0.25

METHOD_MIDPOINT = 0
METHOD_GAUSS2 = 1

STATUS_DONE = 0
STATUS_COLLISION = 1
STATUS_STEP_FAILURE = 2


@njit(cache=True)
def rho_scalar(x, y, z):
    r2 = x * x + y * y
    return (r2 * r2 + 16.0 * z * z) ** 0.25


@njit(cache=True)
def hamiltonian_scalar(s):
    """Return (H, K, U); U is -inf at the singularity."""
    x, y, z, px, py, pz = s[0], s[1], s[2], s[3], s[4], s[5]
    pX = px - 0.5 * y * pz
    pY = py + 0.5 * x * pz
    k = 0.5 * (pX * pX + pY * pY)
    r2 = x * x + y * y
    q = r2 * r2 + 16.0 * z * z
    if q == 0.0:
        u = -np.inf
    else:
        u = -1.0 / (EIGHT_PI * math.sqrt(q))
    return k + u, k, u


@njit(cache=True)
def momenta_scalar(s):
    """Return (ptheta, J)."""
    x, y, z, px, py, pz = s[0], s[1], s[2], s[3], s[4], s[5]
    return x * py - y * px, x * px + y * py + 2.0 * z * pz


@njit(cache=True, inline="always")
def rhs(s, out):
    """Hamilton's equations; writes d/dt [x,y,z,px,py,pz] into ``out``.

    Closed-form partials of H. The potential part uses
    dU/dx = x(x^2+y^2)/(4 pi) q^-3/2,
    dU/dy = y(x^2+y^2)/(4 pi) q^-3/2,
    dU/dz = 2z/pi q^-3/2,  with q = (x^2+y^2)^2 + 16 z^2.
    """
    x, y, z, px, py, pz = s[0], s[1], s[2], s[3], s[4], s[5]
    pX = px - 0.5 * y * pz
    pY = py + 0.5 * x * pz
    r2 = x * x + y * y
    q = r2 * r2 + 16.0 * z * z
    qm32 = 1.0 / (q * math.sqrt(q))
    c = 1.0 / (4.0 * math.pi)
    ux = c * x * r2 * qm32
    uy = c * y * r2 * qm32
    uz = (2.0 / math.pi) * z * qm32
    out[0] = pX
    out[1] = pY
    out[2] = 0.5 * (x * pY - y * pX)
    out[3] = -0.5 * pz * pY - ux
    out[4] = 0.5 * pz * pX - uy
    out[5] = -uz


@njit(cache=True)
def step_midpoint(s, h, fp_tol, fp_maxit, out):
    """One implicit-midpoint step. Returns True if the fixed point converged."""
    m = np.empty(6)
    f = np.empty(6)
    rhs(s, f)
    for i in range(6):
        m[i] = s[i] + 0.5 * h * f[i]
    ok = False
    for _ in range(fp_maxit):
        rhs(m, f)
        err = 0.0
        for i in range(6):
            mi = s[i] + 0.5 * h * f[i]
            d = abs(mi - m[i])
            if d > err:
                err = d
            m[i] = mi
        if err < fp_tol:
            ok = True
            break
    for i in range(6):
        out[i] = 2.0 * m[i] - s[i]
    return ok


@njit(cache=True)
def step_gauss2(s, h, fp_tol, fp_maxit, out):
    """One 2-stage Gauss collocation step (order 4)."""
    k1 = np.empty(6)
    k2 = np.empty(6)
    y1 = np.empty(6)
    y2 = np.empty(6)
    f1 = np.empty(6)
    f2 = np.empty(6)
    rhs(s, k1)
    for i in range(6):
        k2[i] = k1[i]
    ok = False
    for _ in range(fp_maxit):
        for i in range(6):
            y1[i] = s[i] + h * (_A11 * k1[i] + _A12 * k2[i])
            y2[i] = s[i] + h * (_A21 * k1[i] + _A22 * k2[i])
        rhs(y1, f1)
        rhs(y2, f2)
        err = 0.0
        for i in range(6):
            d1 = abs(f1[i] - k1[i])
            d2 = abs(f2[i] - k2[i])
            if d1 > err:
                err = d1
            if d2 > err:
                err = d2
            k1[i] = f1[i]
            k2[i] = f2[i]
        if err < fp_tol:
            ok = True
            break
    for i in range(6):
        out[i] = s[i] + 0.5 * h * (k1[i] + k2[i])
    return ok


@njit(cache=True)
def integrate_kernel(s0, h, max_time, method, fp_tol, fp_maxit,
                     collision_rho, dilational, max_steps, stride):
    """Fixed-step integration from s0 until max_time, collision or failure.

    With ``dilational`` the step contracts as h*min(1, rho^4) near the
    singularity, mirroring the quadratic time scaling of the dilation.
    Every ``stride``-th step is recorded (plus the final one).

    Returns (times, states, count, status); the arrays are oversized,
    only the first ``count`` entries are valid.
    """
    cap = max_steps // stride + 2
    times = np.empty(cap)
    states = np.empty((cap, 6))
    times[0] = 0.0
    states[0] = s0
    cur = s0.copy()
    nxt = np.empty(6)
    t = 0.0
    n = 1
    taken = 0
    status = STATUS_DONE
    while t < max_time - 1e-15 and taken < max_steps:
        he = h
        if dilational:
            r = rho_scalar(cur[0], cur[1], cur[2])
            r4 = r * r * r * r
            if r4 < 1.0:
                he = h * r4
        # land exactly on max_time instead of leaving a rounding crumb
        if t + he > max_time - 1e-9 * h:
            he = max_time - t
        if method == METHOD_GAUSS2:
            ok = step_gauss2(cur, he, fp_tol, fp_maxit, nxt)
        else:
            ok = step_midpoint(cur, he, fp_tol, fp_maxit, nxt)
        if not ok or not math.isfinite(nxt[0]) or not math.isfinite(nxt[5]):
            status = STATUS_STEP_FAILURE
            break
        t += he
        taken += 1
        cur[:] = nxt
        collided = rho_scalar(nxt[0], nxt[1], nxt[2]) <= collision_rho
        if taken % stride == 0 or collided or t >= max_time - 1e-15:
            times[n] = t
            states[n] = nxt
            n += 1
        if collided:
            status = STATUS_COLLISION
            break
    return times, states, n, status


@njit(cache=True)
def distance_minima(times, states, count, ref, exclusion, out_t, out_d):
    """Local minima of the 6D Euclidean distance to ``ref`` after ``exclusion``.

    Each interior minimum of d is refined by quadratic interpolation of
    d^2 through its three bracketing samples (d^2 is smooth through a
    near-exact return where d itself has a cusp). Fills out_t/out_d and
    returns how many minima were found (capped at the buffer size).
    """
    cap = out_t.shape[0]
    m = 0
    d_prev2 = -1.0
    d_prev = -1.0
    for i in range(count):
        d = 0.0
        for j in range(6):
            diff = states[i, j] - ref[j]
            d += diff * diff
        # work with squared distance throughout
        if i >= 2 and d_prev <= d_prev2 and d_prev <= d and times[i - 1] > exclusion:
            # parabola through (t_{i-2}, d_prev2), (t_{i-1}, d_prev), (t_i, d)
            t0, t1, t2 = times[i - 2], times[i - 1], times[i]
            denom = (t0 - t1) * (t0 - t2) * (t1 - t2)
            if denom != 0.0:
                a = (t2 * (d_prev - d_prev2) + t1 * (d_prev2 - d) + t0 * (d - d_prev)) / denom
                b = (t2 * t2 * (d_prev2 - d_prev) + t1 * t1 * (d - d_prev2)
                     + t0 * t0 * (d_prev - d)) / denom
                if a > 0.0:
                    tv = -b / (2.0 * a)
                    if tv < t0:
                        tv = t0
                    elif tv > t2:
                        tv = t2
                    cmin = d_prev2 - a * t0 * t0 - b * t0
                    dv = a * tv * tv + b * tv + cmin
                else:
                    tv = t1
                    dv = d_prev
            else:
                tv = t1
                dv = d_prev
            if dv < 0.0:
                dv = 0.0
            if m < cap:
                out_t[m] = tv
                out_d[m] = math.sqrt(dv)
                m += 1
        d_prev2 = d_prev
        d_prev = d
    return m
