# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels; see ``_core_py.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, cos, sin, tan, INFINITY, isfinite

cnp.import_array()

DEF N_STATE = 8
DEF TOL = 1e-9
DEF DYNAMIC_MIN_SPEED = 2.0

cdef enum:
    IX = 0
    IY = 1
    IYAW = 2
    IVX = 3
    IVY = 4
    IR = 5
    ISTEER = 6
    IAX = 7


def forward_backward(caps, seg_len, double v_start, double v_end, double a_pos, double a_neg_abs):
    cdef const double[::1] c = np.ascontiguousarray(caps, dtype=np.float64)
    cdef const double[::1] d = np.ascontiguousarray(seg_len, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0], i
    out = np.array(c, dtype=np.float64, copy=True)
    cdef double[::1] v = out
    cdef double reach
    v[0] = v_start if v_start < c[0] else c[0]
    for i in range(n - 1):
        reach = sqrt(v[i] * v[i] + 2.0 * a_pos * d[i])
        if reach < v[i + 1]:
            v[i + 1] = reach
    if v_end < v[n - 1]:
        v[n - 1] = v_end
    for i in range(n - 2, -1, -1):
        reach = sqrt(v[i + 1] * v[i + 1] + 2.0 * a_neg_abs * d[i])
        if reach < v[i]:
            v[i] = reach
    return out


cdef inline double _seg_dt(double ua, double ub, double ds) noexcept nogil:
    cdef double s = sqrt(ua) + sqrt(ub)
    if s > 0.0:
        return 2.0 * ds / s
    return INFINITY


def dp_sweep(double u0, double du, Py_ssize_t nu, Py_ssize_t k_lo, Py_ssize_t k_hi,
             Py_ssize_t j_start, double u_end, double ds, kappa, caps2,
             double a_neg, double a_pos, double jx_lim, double jy_lim):
    cdef const double[::1] k = np.ascontiguousarray(kappa, dtype=np.float64)
    cdef const double[::1] cap = np.ascontiguousarray(caps2, dtype=np.float64)
    cdef Py_ssize_t n = k.shape[0], na = k_hi - k_lo + 1
    cdef Py_ssize_t i, j, jn, kk, kn, lo, hi, w, best_j = -1, best_k = -1
    cdef double da = du / (2.0 * ds)
    cdef double u_start = u0 + du * j_start
    cdef double c, dt, pdt, dtmax, a, best = INFINITY, cand, span
    cdef bint jx_on = isfinite(jx_lim), jy_on = isfinite(jy_lim)

    if n == 2:
        a = (u_end - u_start) / (2.0 * ds)
        dt = _seg_dt(u_start, u_end, ds)
        if a < a_neg - TOL or a > a_pos + TOL or not isfinite(dt):
            return INFINITY, np.empty(0)
        if jy_on and fabs(u_end * k[1] - u_start * k[0]) > jy_lim * dt + TOL:
            return INFINITY, np.empty(0)
        return dt, np.array([u_start, u_end])

    u_np = u0 + du * np.arange(nu)
    cdef const double[::1] u = u_np
    cdef double[::1] rt = np.sqrt(u_np)
    cost_np = np.full((nu, na), INFINITY)
    new_np = np.empty((nu, na))
    back_np = np.full((n, nu, na), -1, dtype=np.int16)
    cdef double[:, ::1] cost = cost_np
    cdef double[:, ::1] newc = new_np
    cdef short[:, :, ::1] back = back_np

    with nogil:
        for kk in range(na):
            j = j_start + k_lo + kk
            if j < 0 or j >= nu or u[j] > cap[1] + TOL:
                continue
            dt = _seg_dt(u_start, u[j], ds)
            if not isfinite(dt):
                continue
            if jy_on and fabs(u[j] * k[1] - u_start * k[0]) > jy_lim * dt + TOL:
                continue
            cost[j, kk] = dt

        for i in range(1, n - 2):
            newc[:, :] = INFINITY
            for kk in range(na):
                for j in range(nu):
                    c = cost[j, kk]
                    if c == INFINITY:
                        continue
                    pdt = _seg_dt(u0 + du * (j - k_lo - kk), u[j], ds)
                    lo = 0
                    hi = na
                    if jx_on and rt[j] > 0.0:
                        dtmax = 2.0 * ds / rt[j]
                        w = <Py_ssize_t>((jx_lim * 0.5 * (pdt + dtmax) + TOL) / da) + 1
                        if kk - w > lo:
                            lo = kk - w
                        if kk + w + 1 < hi:
                            hi = kk + w + 1
                    for kn in range(lo, hi):
                        jn = j + k_lo + kn
                        if jn < 0 or jn >= nu:
                            continue
                        if u[jn] > cap[i + 1] + TOL:
                            continue
                        if rt[j] + rt[jn] <= 0.0:
                            continue
                        dt = 2.0 * ds / (rt[j] + rt[jn])
                        if jx_on:
                            span = 0.5 * (pdt + dt)
                            if fabs(<double>(kn - kk)) * da > jx_lim * span + TOL:
                                continue
                        if jy_on and fabs(u[jn] * k[i + 1] - u[j] * k[i]) > jy_lim * dt + TOL:
                            continue
                        cand = c + dt
                        if cand < newc[jn, kn]:
                            newc[jn, kn] = cand
                            back[i + 1, jn, kn] = <short>kk
            cost[:, :] = newc

        i = n - 2
        for j in range(nu):
            for kk in range(na):
                c = cost[j, kk]
                if c == INFINITY:
                    continue
                a = (u_end - u[j]) / (2.0 * ds)
                if a < a_neg - TOL or a > a_pos + TOL:
                    continue
                dt = _seg_dt(u[j], u_end, ds)
                if not isfinite(dt):
                    continue
                if jy_on and fabs(u_end * k[i + 1] - u[j] * k[i]) > jy_lim * dt + TOL:
                    continue
                if jx_on:
                    pdt = _seg_dt(u0 + du * (j - k_lo - kk), u[j], ds)
                    if fabs(a - (k_lo + kk) * da) > jx_lim * 0.5 * (pdt + dt) + TOL:
                        continue
                if c + dt < best:
                    best = c + dt
                    best_j = j
                    best_k = kk

    if best_j < 0:
        return INFINITY, np.empty(0)
    seq = np.empty(n)
    seq[n - 1] = u_end
    j = best_j
    kk = best_k
    for i in range(n - 2, 0, -1):
        seq[i] = u0 + du * j
        kn = back[i, j, kk] if i >= 2 else -1
        j = j - (k_lo + kk)
        kk = kn
    seq[0] = u_start
    return best, seq


cdef void _deriv(double* s, double steer_target, double ax_target, double* p,
                 bint dynamic, double* out) noexcept nogil:
    cdef double m = p[0], iz = p[1], lf = p[2], lr = p[3], caf = p[4], car = p[5]
    cdef double tau_s = p[6], tau_a = p[7]
    cdef double yaw = s[IYAW], vx = s[IVX], vy = s[IVY], r = s[IR]
    cdef double steer = s[ISTEER], ax = s[IAX]
    cdef double cy, sy
    out[ISTEER] = (steer_target - steer) / tau_s if tau_s > 0.0 else 0.0
    out[IAX] = (ax_target - ax) / tau_a if tau_a > 0.0 else 0.0
    out[IVX] = 0.0 if (vx <= 0.0 and ax < 0.0) else ax
    if dynamic and vx >= DYNAMIC_MIN_SPEED:
        out[IVY] = (-(caf + car) / (m * vx) * vy
                    + ((lr * car - lf * caf) / (m * vx) - vx) * r
                    + caf / m * steer)
        out[IR] = ((lr * car - lf * caf) / (iz * vx) * vy
                   - (lf * lf * caf + lr * lr * car) / (iz * vx) * r
                   + lf * caf / iz * steer)
        out[IYAW] = r
        cy = cos(yaw)
        sy = sin(yaw)
        out[IX] = vx * cy - vy * sy
        out[IY] = vx * sy + vy * cy
    else:
        out[IVY] = 0.0
        out[IR] = 0.0
        out[IYAW] = vx * tan(steer) / (lf + lr)
        out[IX] = vx * cos(yaw)
        out[IY] = vx * sin(yaw)


def bicycle_deriv(state, double steer_target, double ax_target, params, bint dynamic):
    cdef double s[N_STATE]
    cdef double p[8]
    cdef double o[N_STATE]
    cdef int j
    for j in range(N_STATE):
        s[j] = state[j]
    for j in range(8):
        p[j] = params[j]
    _deriv(s, steer_target, ax_target, p, dynamic, o)
    return [o[j] for j in range(N_STATE)]


def rk4_step(state, double steer_cmd, double ax_cmd, params, double steer_limit,
             double dt, bint dynamic):
    cdef double s0[N_STATE]
    cdef double tmp[N_STATE]
    cdef double k1[N_STATE]
    cdef double k2[N_STATE]
    cdef double k3[N_STATE]
    cdef double k4[N_STATE]
    cdef double p[8]
    cdef int j
    cdef double steer_target
    cdef bint use_dyn
    for j in range(N_STATE):
        s0[j] = state[j]
    for j in range(8):
        p[j] = params[j]
    steer_target = steer_cmd
    if steer_target > steer_limit:
        steer_target = steer_limit
    elif steer_target < -steer_limit:
        steer_target = -steer_limit
    if p[6] <= 0.0:
        s0[ISTEER] = steer_target
    if p[7] <= 0.0:
        s0[IAX] = ax_cmd
    use_dyn = dynamic and s0[IVX] >= DYNAMIC_MIN_SPEED
    _deriv(s0, steer_target, ax_cmd, p, use_dyn, k1)
    for j in range(N_STATE):
        tmp[j] = s0[j] + 0.5 * dt * k1[j]
    _deriv(tmp, steer_target, ax_cmd, p, use_dyn, k2)
    for j in range(N_STATE):
        tmp[j] = s0[j] + 0.5 * dt * k2[j]
    _deriv(tmp, steer_target, ax_cmd, p, use_dyn, k3)
    for j in range(N_STATE):
        tmp[j] = s0[j] + dt * k3[j]
    _deriv(tmp, steer_target, ax_cmd, p, use_dyn, k4)
    out = np.empty(N_STATE)
    cdef double[::1] o = out
    for j in range(N_STATE):
        o[j] = s0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    if o[IVX] < 0.0:
        o[IVX] = 0.0
    if o[ISTEER] > steer_limit:
        o[ISTEER] = steer_limit
    elif o[ISTEER] < -steer_limit:
        o[ISTEER] = -steer_limit
    if not use_dyn:
        o[IVY] = 0.0
        o[IR] = o[IVX] * tan(o[ISTEER]) / (p[2] + p[3])
    return out
