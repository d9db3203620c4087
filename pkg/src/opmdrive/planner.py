"""Minimum-time speed planning along a path inside the comfort region.

Two planners share one constraint model (see :func:`profile_kinematics`):

* :func:`plan_velocity` runs an acceleration-limited forward/backward
  pass and then tightens it into a jerk-feasible profile by sequential
  linear programming in squared speed.
* :func:`dp_oracle_plan` enumerates speed-quantized state sequences
  exactly and is the reference the first one is checked against.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.optimize import linprog, minimize_scalar

from opmdrive import _backend
from opmdrive.errors import InfeasibleError, PreconditionError, StalledProfileError
from opmdrive.opm import OccupantPreferenceMetric
from opmdrive.path import PathGeometry

log = logging.getLogger(__name__)

KAPPA_EPS = 1e-9
ORACLE_MAX_STATIONS = 500
# interior speeds are kept above this so every segment has finite duration
MIN_INTERIOR_SPEED = 0.05
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class BoundaryConditions:
    v_start: float = 0.0
    v_end: float = 0.0
    v_global_max: float = 30.0

    def __post_init__(self) -> None:
        vals = (self.v_start, self.v_end, self.v_global_max)
        if not all(math.isfinite(v) and v >= 0 for v in vals):
            raise ValueError(f"boundary speeds must be finite and non-negative: {vals}")
        if self.v_global_max <= 0:
            raise ValueError("v_global_max must be positive")
        if self.v_start > self.v_global_max or self.v_end > self.v_global_max:
            raise ValueError("v_start and v_end must not exceed v_global_max")


@dataclass(frozen=True, eq=False)
class VelocityProfile:
    """Planned speed per station.

    ``ax_plan[i]`` is the constant acceleration of the segment leaving
    station ``i``; the last station repeats the last segment's value.
    ``kappa`` is carried along so the profile can be audited on its own.
    """

    s: np.ndarray
    v: np.ndarray
    ax_plan: np.ndarray
    t: np.ndarray
    kappa: np.ndarray

    @property
    def total_time(self) -> float:
        return float(self.t[-1])

    def __len__(self) -> int:
        return len(self.s)

    def at(self, s: float) -> tuple[float, float]:
        """Reference ``(v, ax_plan)`` at arc length ``s`` (clamped to range).

        Speed is interpolated under constant acceleration, i.e. linearly
        in ``v**2``.
        """
        if s <= self.s[0]:
            return float(self.v[0]), float(self.ax_plan[0])
        if s >= self.s[-1]:
            return float(self.v[-1]), float(self.ax_plan[-1])
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        f = (s - self.s[i]) / (self.s[i + 1] - self.s[i])
        u = (1.0 - f) * self.v[i] ** 2 + f * self.v[i + 1] ** 2
        return math.sqrt(max(u, 0.0)), float(self.ax_plan[i])


def stations_for(path: PathGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Arc lengths and curvature a profile is planned on.

    Closed paths get the first station appended at ``s = length`` so the
    profile covers one full lap.
    """
    if path.closed:
        return np.append(path.s, path.length), np.append(path.kappa, path.kappa[0])
    return np.asarray(path.s, dtype=float), np.asarray(path.kappa, dtype=float)


def curvature_speed_cap(
    path: PathGeometry | np.ndarray, opm: OccupantPreferenceMetric, v_global_max: float
) -> np.ndarray:
    """Per-station speed limit from the lateral acceleration threshold."""
    kappa = path.kappa if isinstance(path, PathGeometry) else np.asarray(path, dtype=float)
    return np.minimum(v_global_max, np.sqrt(opm.ay_abs / np.maximum(np.abs(kappa), KAPPA_EPS)))


def _segment_times(v: np.ndarray, seg: np.ndarray) -> np.ndarray:
    vs = v[:-1] + v[1:]
    with np.errstate(divide="ignore"):
        return np.where(vs > 0, 2.0 * seg / np.where(vs > 0, vs, 1.0), np.inf)


def travel_time(profile: VelocityProfile) -> float:
    """Sum of segment durations ``2 ds / (v_i + v_{i+1})``."""
    if len(profile.s) < 2:
        raise StalledProfileError("profile has fewer than two stations")
    dt = _segment_times(np.asarray(profile.v), np.diff(profile.s))
    if not np.all(np.isfinite(dt)):
        bad = int(np.nonzero(~np.isfinite(dt))[0][0])
        raise StalledProfileError(f"zero speed at both ends of segment {bad}")
    return float(dt.sum())


def _make_profile(s: np.ndarray, kappa: np.ndarray, v: np.ndarray) -> VelocityProfile:
    seg = np.diff(s)
    dt = _segment_times(v, seg)
    if not np.all(np.isfinite(dt)):
        bad = int(np.nonzero(~np.isfinite(dt))[0][0])
        raise StalledProfileError(f"zero speed at both ends of segment {bad}")
    ax_seg = (v[1:] ** 2 - v[:-1] ** 2) / (2.0 * seg)
    ax_plan = np.append(ax_seg, ax_seg[-1])
    t = np.concatenate([[0.0], np.cumsum(dt)])
    return VelocityProfile(s=s.copy(), v=v.copy(), ax_plan=ax_plan, t=t, kappa=kappa.copy())


@dataclass(frozen=True)
class ProfileKinematics:
    """Planned quantities a profile is judged by.

    ``ax`` and ``ay`` are per station, ``jx`` per interior station (between
    consecutive segments) and ``jy`` per segment.
    """

    ax: np.ndarray
    ay: np.ndarray
    jx: np.ndarray
    jy: np.ndarray


def profile_kinematics(profile: VelocityProfile) -> ProfileKinematics:
    v = np.asarray(profile.v)
    seg = np.diff(profile.s)
    dt = _segment_times(v, seg)
    ax_seg = (v[1:] ** 2 - v[:-1] ** 2) / (2.0 * seg)
    ay = v**2 * profile.kappa
    jx = np.diff(ax_seg) / (0.5 * (dt[:-1] + dt[1:]))
    jy = np.diff(ay) / dt
    return ProfileKinematics(ax=np.asarray(profile.ax_plan), ay=ay, jx=jx, jy=jy)


def profile_violation(profile: VelocityProfile, opm: OccupantPreferenceMetric) -> dict[str, float]:
    """Largest excess over each threshold (``<= 0`` means satisfied)."""
    k = profile_kinematics(profile)
    return {
        "ax_pos": float(np.max(k.ax) - opm.ax_pos),
        "ax_neg": float(opm.ax_neg - np.min(k.ax)),
        "ay": float(np.max(np.abs(k.ay)) - opm.ay_abs),
        "jx": float(np.max(np.abs(k.jx), initial=0.0) - opm.jx_abs),
        "jy": float(np.max(np.abs(k.jy), initial=0.0) - opm.jy_abs),
        "v_neg": float(-np.min(profile.v)),
    }


def _check_boundaries(caps: np.ndarray, bc: BoundaryConditions) -> None:
    if bc.v_start > caps[0] + 1e-9:
        raise InfeasibleError(
            f"v_start={bc.v_start:g} exceeds the speed cap {caps[0]:.4g} at station 0", station=0
        )
    n = len(caps)
    if bc.v_end > caps[-1] + 1e-9:
        raise InfeasibleError(
            f"v_end={bc.v_end:g} exceeds the speed cap {caps[-1]:.4g} at station {n - 1}",
            station=n - 1,
        )


def _envelope(
    caps: np.ndarray, seg: np.ndarray, opm: OccupantPreferenceMetric, bc: BoundaryConditions
) -> np.ndarray:
    v = _backend.forward_backward(caps, seg, bc.v_start, bc.v_end, opm.ax_pos, -opm.ax_neg)
    v = np.asarray(v, dtype=float)
    if v[0] < bc.v_start - 1e-9:
        # braking from v_start cannot honour a downstream cap
        fwd = np.sqrt(np.maximum(bc.v_start**2 + 2.0 * opm.ax_neg * np.cumsum(seg), 0.0))
        bind = int(np.argmax(fwd > caps[1:] + 1e-9)) + 1
        raise InfeasibleError(
            f"cannot decelerate from v_start={bc.v_start:g} in time for station {bind}",
            station=bind,
        )
    if v[-1] < bc.v_end - 1e-9:
        raise InfeasibleError(
            f"v_end={bc.v_end:g} unreachable (at most {v[-1]:.4g}) at station {len(v) - 1}",
            station=len(v) - 1,
        )
    return v


class _JerkLP:
    """Sequential LP over squared speeds ``u`` with jerk rows linearized.

    Segment durations are convex in ``u``, so their tangent planes
    under-estimate them everywhere; replacing the duration on the
    right-hand side of each jerk constraint by its tangent gives a
    polytope that lies inside the true feasible set. Every LP solution is
    therefore jerk-feasible, and re-linearizing at the new point can only
    enlarge the polytope around it.
    """

    def __init__(self, s, kappa, caps, envelope, opm, bc):
        self.seg = np.diff(s)
        self.kappa = kappa
        self.opm = opm
        n = len(s)
        self.n = n
        hi = np.minimum(caps, envelope) ** 2
        lo = np.minimum(MIN_INTERIOR_SPEED**2, 0.25 * hi)
        lo[0] = hi[0] = bc.v_start**2
        lo[-1] = hi[-1] = bc.v_end**2
        self.lo, self.hi = lo, hi
        self.fixed = np.zeros(n, dtype=bool)
        self.fixed[[0, -1]] = True
        self._static_rows()

    def _static_rows(self) -> None:
        n, seg, opm = self.n, self.seg, self.opm
        m = n - 1
        r = np.arange(m)
        # ax_i = (u_{i+1} - u_i) / (2 ds_i)
        g = 1.0 / (2.0 * seg)
        self.A_ax = sparse.csr_matrix(
            (np.concatenate([-g, g]), (np.concatenate([r, r]), np.concatenate([r, r + 1]))),
            shape=(m, n),
        )
        # jerk numerator: ax_{j+1} - ax_j
        self.D = (self.A_ax[1:] - self.A_ax[:-1]).tocsr()
        k = self.kappa
        self.Lat = sparse.csr_matrix(
            (np.concatenate([-k[:-1], k[1:]]), (np.concatenate([r, r]), np.concatenate([r, r + 1]))),
            shape=(m, n),
        )
        self.b_ax = (opm.ax_pos, -opm.ax_neg)

    def _durations(self, u: np.ndarray):
        """Segment durations and their gradients w.r.t. ``u`` at ``u``."""
        rt = np.sqrt(u)
        ssum = rt[:-1] + rt[1:]
        T = 2.0 * self.seg / ssum
        base = -self.seg / ssum**2
        with np.errstate(divide="ignore"):
            ga = np.where(self.fixed[:-1], 0.0, base / np.where(rt[:-1] > 0, rt[:-1], 1.0))
            gb = np.where(self.fixed[1:], 0.0, base / np.where(rt[1:] > 0, rt[1:], 1.0))
        return T, ga, gb

    def solve(self, u_lin: np.ndarray, weights: np.ndarray) -> np.ndarray | None:
        n, m = self.n, self.n - 1
        opm = self.opm
        T, ga, gb = self._durations(u_lin)
        r = np.arange(m)
        G = sparse.csr_matrix(
            (np.concatenate([ga, gb]), (np.concatenate([r, r]), np.concatenate([r, r + 1]))),
            shape=(m, n),
        )
        # tangent value: T(u_lin) + G (u - u_lin) = G u + c
        c = T - G @ u_lin
        rows = [self.A_ax, -self.A_ax]
        rhs = [np.full(m, self.b_ax[0] - _FEAS_TOL), np.full(m, self.b_ax[1] - _FEAS_TOL)]
        if math.isfinite(opm.jx_abs) and m >= 2:
            S = 0.5 * (G[:-1] + G[1:])
            cS = 0.5 * (c[:-1] + c[1:])
            jx = opm.jx_abs
            rows += [self.D - jx * S, -self.D - jx * S]
            rhs += [jx * cS - _FEAS_TOL] * 2
        if math.isfinite(opm.jy_abs):
            jy = opm.jy_abs
            rows += [self.Lat - jy * G, -self.Lat - jy * G]
            rhs += [jy * c - _FEAS_TOL] * 2
        A = sparse.vstack(rows).tocsr()
        b = np.concatenate(rhs)
        res = linprog(
            -weights,
            A_ub=A,
            b_ub=b,
            bounds=np.column_stack([self.lo, self.hi]),
            method="highs",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
        if res.status != 0:
            return None
        return np.clip(res.x, self.lo, self.hi)


def _time_weights(u: np.ndarray, seg: np.ndarray, fixed: np.ndarray) -> np.ndarray:
    """Negative gradient of total travel time with respect to ``u``."""
    rt = np.sqrt(np.maximum(u, 1e-12))
    ssum = rt[:-1] + rt[1:]
    base = seg / ssum**2
    w = np.zeros_like(u)
    w[:-1] += base / rt[:-1]
    w[1:] += base / rt[1:]
    w[fixed] = 0.0
    return w / np.max(w)


def plan_velocity(
    path: PathGeometry,
    opm: OccupantPreferenceMetric,
    bc: BoundaryConditions,
    max_iter: int = 50,
    tol: float = 1e-6,
) -> VelocityProfile:
    """Minimum-time speed profile satisfying all five comfort thresholds.

    Raises:
        InfeasibleError: a boundary speed cannot be met; ``station`` names
            the binding station.
    """
    s, kappa = stations_for(path)
    if len(s) < 2:
        raise PreconditionError("path needs at least two stations")
    caps = curvature_speed_cap(kappa, opm, bc.v_global_max)
    _check_boundaries(caps, bc)
    seg = np.diff(s)
    env = _envelope(caps, seg, opm, bc)
    if not (math.isfinite(opm.jx_abs) or math.isfinite(opm.jy_abs)):
        return _make_profile(s, kappa, env)

    lp = _JerkLP(s, kappa, caps, env, opm, bc)
    u_lin = np.clip(env**2, lp.lo, lp.hi)
    u = None
    for _ in range(8):
        u = lp.solve(u_lin, _time_weights(u_lin, seg, lp.fixed))
        if u is not None:
            break
        # tangent taken too far from the feasible set; retry closer to rest
        u_lin = np.maximum(0.25 * u_lin, lp.lo)
        u_lin[lp.fixed] = lp.lo[lp.fixed]
    if u is None:
        raise InfeasibleError("no jerk-feasible profile for these boundary conditions", station=0)

    def lap_time(uu: np.ndarray) -> float:
        return float(_segment_times(np.sqrt(np.maximum(uu, 0.0)), seg).sum())

    t_cur = lap_time(u)
    for _ in range(max_iter):
        cand = lp.solve(u, _time_weights(u, seg, lp.fixed))
        if cand is None:
            break
        # the segment u -> cand lies inside the current polytope, hence is
        # feasible; travel time is convex along it
        direction = cand - u
        res = minimize_scalar(
            lambda lam: lap_time(u + lam * direction), bounds=(0.0, 1.0), method="bounded",
            options={"xatol": 1e-6},
        )
        lam = float(res.x)
        if lap_time(cand) <= res.fun:
            lam = 1.0
        nxt = np.clip(u + lam * direction, lp.lo, lp.hi)
        t_nxt = lap_time(nxt)
        if t_nxt >= t_cur:
            break
        step = float(np.max(np.abs(np.sqrt(nxt) - np.sqrt(u))))
        gain = t_cur - t_nxt
        u, t_cur = nxt, t_nxt
        if step < tol or gain < 1e-6 * t_cur:
            break
    log.debug("jerk refinement finished at %.4f s", t_cur)
    return _make_profile(s, kappa, np.sqrt(u))


def dp_oracle_plan(
    path: PathGeometry,
    opm: OccupantPreferenceMetric,
    bc: BoundaryConditions,
    a_grid: float = 0.05,
    max_stations: int = ORACLE_MAX_STATIONS,
) -> VelocityProfile:
    """Exact shortest-time profile over a quantized lattice.

    Segment accelerations are restricted to multiples of ``a_grid`` and
    squared speeds to the lattice they generate from ``v_start``
    (spacing ``2 * ds * a_grid``), so the speed quantization follows from
    the acceleration step. Only the last segment takes the off-lattice
    acceleration needed to land on ``v_end``. Every edge is checked with
    the same planned-jerk definitions as :func:`plan_velocity`, so the
    result is a feasible profile and an upper bound on the continuous
    optimum that tightens as ``a_grid`` shrinks.

    Raises:
        PreconditionError: too many stations or non-uniform spacing.
        InfeasibleError: no lattice path satisfies all thresholds.
    """
    s, kappa = stations_for(path)
    n = len(s)
    if n > max_stations:
        raise PreconditionError(f"oracle limited to {max_stations} stations, path has {n}")
    if n < 2:
        raise PreconditionError("path needs at least two stations")
    if not a_grid > 0:
        raise ValueError("a_grid must be positive")
    seg = np.diff(s)
    ds = float(seg.mean())
    if np.max(np.abs(seg - ds)) > 1e-9 * max(ds, 1.0):
        raise PreconditionError("oracle requires uniform station spacing")
    caps = curvature_speed_cap(kappa, opm, bc.v_global_max)
    _check_boundaries(caps, bc)

    du = 2.0 * ds * a_grid
    u_start = bc.v_start**2
    j_start = int(math.floor(u_start / du + 1e-9))
    u0 = u_start - j_start * du
    u_top = float(np.max(caps)) ** 2
    nu = int(math.floor((u_top - u0) / du + 1e-9)) + 1
    k_lo = int(math.ceil(opm.ax_neg / a_grid - 1e-9))
    k_hi = int(math.floor(opm.ax_pos / a_grid + 1e-9))
    if k_hi - k_lo + 1 > 32000:
        raise PreconditionError("a_grid too fine for the lattice index type")
    t, u = _backend.dp_sweep(
        u0, du, nu, k_lo, k_hi, j_start, bc.v_end**2, ds, kappa, caps**2,
        opm.ax_neg, opm.ax_pos, opm.jx_abs, opm.jy_abs,
    )
    if not math.isfinite(t):
        raise InfeasibleError("no feasible path through the oracle lattice")
    return _make_profile(s, kappa, np.sqrt(np.maximum(np.asarray(u), 0.0)))


def trapezoid_time(length: float, a_pos: float, a_neg_abs: float, v_max: float,
                   v_start: float = 0.0, v_end: float = 0.0) -> float:
    """Closed-form minimum time on a straight with acceleration limits only."""
    d_acc = (v_max**2 - v_start**2) / (2.0 * a_pos)
    d_dec = (v_max**2 - v_end**2) / (2.0 * a_neg_abs)
    if d_acc + d_dec <= length:
        return (
            (v_max - v_start) / a_pos
            + (v_max - v_end) / a_neg_abs
            + (length - d_acc - d_dec) / v_max
        )
    v_peak = math.sqrt(
        (2.0 * length * a_pos * a_neg_abs + a_neg_abs * v_start**2 + a_pos * v_end**2)
        / (a_pos + a_neg_abs)
    )
    return (v_peak - v_start) / a_pos + (v_peak - v_end) / a_neg_abs


def write_profile_csv(profile: VelocityProfile, dest: str | Path) -> None:
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "v", "ax_plan", "t"])
        for row in zip(profile.s, profile.v, profile.ax_plan, profile.t):
            w.writerow([repr(float(x)) for x in row])


def read_profile_csv(src: str | Path, kappa: np.ndarray | None = None) -> VelocityProfile:
    data = np.genfromtxt(src, delimiter=",", names=True)
    data = np.atleast_1d(data)
    s = np.asarray(data["s"], dtype=float)
    return VelocityProfile(
        s=s,
        v=np.asarray(data["v"], dtype=float),
        ax_plan=np.asarray(data["ax_plan"], dtype=float),
        t=np.asarray(data["t"], dtype=float),
        kappa=np.zeros_like(s) if kappa is None else np.asarray(kappa, dtype=float),
    )
