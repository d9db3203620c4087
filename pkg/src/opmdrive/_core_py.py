"""Reference kernels in Python/NumPy.

These mirror ``_core.pyx`` function for function and are used when the
compiled extension is unavailable (or ``OPMDRIVE_PURE_PYTHON=1``).
"""

from __future__ import annotations

import math

import numpy as np

# state vector layout shared with the compiled kernels
X, Y, YAW, VX, VY, R, STEER, AX = range(8)
N_STATE = 8

# below this speed the dynamic model degrades to the kinematic one
DYNAMIC_MIN_SPEED = 2.0

_TOL = 1e-9


def forward_backward(caps, seg_len, v_start, v_end, a_pos, a_neg_abs):
    """Acceleration-limited speed envelope under per-station caps.

    Returns the speed array. The first and last entries may differ from
    ``v_start``/``v_end`` when those are unreachable; the caller decides.
    """
    caps = np.asarray(caps, dtype=float)
    seg_len = np.asarray(seg_len, dtype=float)
    n = len(caps)
    v = caps.copy()
    v[0] = min(v_start, caps[0])
    for i in range(n - 1):
        reach = math.sqrt(v[i] * v[i] + 2.0 * a_pos * seg_len[i])
        if reach < v[i + 1]:
            v[i + 1] = reach
    if v_end < v[n - 1]:
        v[n - 1] = v_end
    for i in range(n - 2, -1, -1):
        reach = math.sqrt(v[i + 1] * v[i + 1] + 2.0 * a_neg_abs * seg_len[i])
        if reach < v[i]:
            v[i] = reach
    return v


def _seg_dt(ua, ub, ds):
    s = math.sqrt(ua) + math.sqrt(ub)
    return 2.0 * ds / s if s > 0.0 else math.inf


def dp_sweep(u0, du, nu, k_lo, k_hi, j_start, u_end, ds, kappa, caps2, a_neg, a_pos, jx_lim, jy_lim):
    """Shortest-time search over the lattice ``(station, u index, accel index)``.

    Squared speed is ``u_j = u0 + j*du`` and segment accelerations are
    ``k*da`` with ``du = 2*ds*da``, so every interior transition stays on
    the lattice exactly: ``j' = j + k'``. The final segment uses whatever
    acceleration reaches ``u_end`` and is checked like any other.

    Returns ``(total_time, u_sequence)``; ``(inf, empty)`` when infeasible.
    """
    kappa = np.asarray(kappa, dtype=float)
    caps2 = np.asarray(caps2, dtype=float)
    n = len(kappa)
    na = k_hi - k_lo + 1
    inf = math.inf
    u = u0 + du * np.arange(nu)
    rt = np.sqrt(u)
    da = du / (2.0 * ds)
    u_start = u[j_start]

    if n == 2:
        a = (u_end - u_start) / (2.0 * ds)
        dt = _seg_dt(u_start, u_end, ds)
        ok = a_neg - _TOL <= a <= a_pos + _TOL and math.isfinite(dt)
        if ok and math.isfinite(jy_lim):
            ok = abs(u_end * kappa[1] - u_start * kappa[0]) <= jy_lim * dt + _TOL
        if not ok:
            return inf, np.empty(0)
        return dt, np.array([u_start, u_end])

    back = np.full((n, nu, na), -1, dtype=np.int16)
    cost = np.full((nu, na), inf)
    for kk in range(na):
        j = j_start + k_lo + kk
        if j < 0 or j >= nu or u[j] > caps2[1] + _TOL:
            continue
        dt = _seg_dt(u_start, u[j], ds)
        if not math.isfinite(dt):
            continue
        if math.isfinite(jy_lim) and abs(u[j] * kappa[1] - u_start * kappa[0]) > jy_lim * dt + _TOL:
            continue
        cost[j, kk] = dt

    jidx = np.arange(nu)
    for i in range(1, n - 2):
        new = np.full((nu, na), inf)
        nb = np.full((nu, na), -1, dtype=np.int16)
        ok_cap = u <= caps2[i + 1] + _TOL
        for kk in range(na):
            src = cost[:, kk]
            live = np.isfinite(src)
            if not live.any():
                continue
            k = k_lo + kk
            jp = jidx - k
            with np.errstate(invalid="ignore", divide="ignore"):
                rt_prev = np.sqrt(np.where(jp >= 0, u0 + du * jp, 0.0))
                pdt = np.where(rt_prev + rt > 0, 2.0 * ds / (rt_prev + rt), inf)
            for kn in range(na):
                step = k_lo + kn
                lo = max(0, -step)
                hi = min(nu, nu - step)
                if lo >= hi:
                    continue
                a_sl = slice(lo, hi)
                b_sl = slice(lo + step, hi + step)
                m = live[a_sl] & ok_cap[b_sl]
                if not m.any():
                    continue
                ssum = rt[a_sl] + rt[b_sl]
                with np.errstate(divide="ignore"):
                    dt = np.where(ssum > 0, 2.0 * ds / np.where(ssum > 0, ssum, 1.0), inf)
                m &= np.isfinite(dt)
                if math.isfinite(jx_lim):
                    m &= abs(kn - kk) * da <= jx_lim * 0.5 * (pdt[a_sl] + dt) + _TOL
                if math.isfinite(jy_lim):
                    m &= np.abs(u[b_sl] * kappa[i + 1] - u[a_sl] * kappa[i]) <= jy_lim * dt + _TOL
                cand = np.where(m, src[a_sl] + dt, inf)
                tgt = new[b_sl, kn]
                better = cand < tgt
                tgt[better] = cand[better]
                new[b_sl, kn] = tgt
                col = nb[b_sl, kn]
                col[better] = kk
                nb[b_sl, kn] = col
        cost = new
        back[i + 1] = nb

    # last segment: exact acceleration onto u_end
    best, best_state = inf, None
    i = n - 2
    for j in range(nu):
        for kk in range(na):
            c = cost[j, kk]
            if c == inf:
                continue
            a = (u_end - u[j]) / (2.0 * ds)
            if a < a_neg - _TOL or a > a_pos + _TOL:
                continue
            dt = _seg_dt(u[j], u_end, ds)
            if not math.isfinite(dt):
                continue
            if math.isfinite(jy_lim) and abs(u_end * kappa[i + 1] - u[j] * kappa[i]) > jy_lim * dt + _TOL:
                continue
            if math.isfinite(jx_lim):
                jp = j - (k_lo + kk)
                pdt = _seg_dt(u0 + du * jp, u[j], ds)
                if abs(a - (k_lo + kk) * da) > jx_lim * 0.5 * (pdt + dt) + _TOL:
                    continue
            if c + dt < best:
                best, best_state = c + dt, (j, kk)
    if best_state is None:
        return inf, np.empty(0)
    return best, _backtrack(back, best_state, n, u0, du, k_lo, u_end, j_start)


def _backtrack(back, state, n, u0, du, k_lo, u_end, j_start):
    seq = np.empty(n)
    seq[n - 1] = u_end
    j, kk = state
    for i in range(n - 2, 0, -1):
        seq[i] = u0 + du * j
        prev_kk = int(back[i, j, kk]) if i >= 2 else -1
        j = j - (k_lo + kk)
        kk = prev_kk
    seq[0] = u0 + du * j_start
    return seq


def bicycle_deriv(state, steer_target, ax_target, params, dynamic):
    """Time derivative of the state vector.

    ``params`` is ``(m, iz, lf, lr, caf, car, steer_lag_tau, accel_lag_tau)``.
    A lag constant of zero means the actuator state is held (it is set to
    its target before integration).
    """
    m, iz, lf, lr, caf, car, tau_s, tau_a = params
    yaw, vx, vy, r, steer, ax = state[YAW], state[VX], state[VY], state[R], state[STEER], state[AX]
    d = [0.0] * N_STATE
    wheelbase = lf + lr
    d[STEER] = (steer_target - steer) / tau_s if tau_s > 0.0 else 0.0
    d[AX] = (ax_target - ax) / tau_a if tau_a > 0.0 else 0.0
    d[VX] = 0.0 if (vx <= 0.0 and ax < 0.0) else ax
    if dynamic and vx >= DYNAMIC_MIN_SPEED:
        d[VY] = (
            -(caf + car) / (m * vx) * vy
            + ((lr * car - lf * caf) / (m * vx) - vx) * r
            + caf / m * steer
        )
        d[R] = (
            (lr * car - lf * caf) / (iz * vx) * vy
            - (lf * lf * caf + lr * lr * car) / (iz * vx) * r
            + lf * caf / iz * steer
        )
        d[YAW] = r
        c, s = math.cos(yaw), math.sin(yaw)
        d[X] = vx * c - vy * s
        d[Y] = vx * s + vy * c
    else:
        d[YAW] = vx * math.tan(steer) / wheelbase
        d[X] = vx * math.cos(yaw)
        d[Y] = vx * math.sin(yaw)
    return d


def rk4_step(state, steer_cmd, ax_cmd, params, steer_limit, dt, dynamic):
    """One fixed-step RK4 update; returns a new float64 array."""
    s0 = np.array(state, dtype=float)
    steer_target = min(max(steer_cmd, -steer_limit), steer_limit)
    if params[6] <= 0.0:
        s0[STEER] = steer_target
    if params[7] <= 0.0:
        s0[AX] = ax_cmd
    use_dyn = bool(dynamic) and s0[VX] >= DYNAMIC_MIN_SPEED
    k1 = np.array(bicycle_deriv(s0, steer_target, ax_cmd, params, use_dyn))
    k2 = np.array(bicycle_deriv(s0 + 0.5 * dt * k1, steer_target, ax_cmd, params, use_dyn))
    k3 = np.array(bicycle_deriv(s0 + 0.5 * dt * k2, steer_target, ax_cmd, params, use_dyn))
    k4 = np.array(bicycle_deriv(s0 + dt * k3, steer_target, ax_cmd, params, use_dyn))
    out = s0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if out[VX] < 0.0:
        out[VX] = 0.0
    out[STEER] = min(max(out[STEER], -steer_limit), steer_limit)
    if not use_dyn:
        out[VY] = 0.0
        out[R] = out[VX] * math.tan(out[STEER]) / (params[2] + params[3])
    return out
