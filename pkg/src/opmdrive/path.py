"""Arc-length parameterized route geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from opmdrive.errors import (
    DegenerateGeometryError,
    InsufficientPointsError,
    OffPathError,
    OutOfRangeError,
)

DEFAULT_DS = 1.0


@dataclass(frozen=True, eq=False)
class PathGeometry:
    """Stations sampled at uniform arc-length spacing.

    For a closed path the last station is *not* a copy of the first;
    ``length`` includes the closing segment and station indices wrap.
    """

    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    kappa: np.ndarray
    closed: bool = False
    length: float = field(default=0.0)

    def __post_init__(self) -> None:
        for name in ("s", "x", "y", "heading", "kappa"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.length == 0.0:
            object.__setattr__(self, "length", float(self.s[-1]))

    def __len__(self) -> int:
        return len(self.s)

    @property
    def ds(self) -> float:
        """Station spacing (uniform by construction)."""
        if len(self.s) > 1:
            return float(self.s[1] - self.s[0])
        return self.length

    def wrap(self, s: float) -> float:
        """Map ``s`` into ``[0, length]``; wraps on closed paths, raises otherwise."""
        if self.closed:
            return float(s % self.length)
        tol = 1e-9 * max(1.0, self.length)
        if s < -tol or s > self.length + tol:
            raise OutOfRangeError(f"s={s:.6g} outside open path [0, {self.length:.6g}]")
        return min(max(float(s), 0.0), self.length)

    def _bracket(self, s: float) -> tuple[int, int, float]:
        s = self.wrap(s)
        n = len(self.s)
        if self.closed:
            i = min(int(s // self.ds), n - 1)
            j = (i + 1) % n
            s_j = self.s[i] + self.ds
        else:
            i = min(int(np.searchsorted(self.s, s, side="right")) - 1, n - 2)
            i = max(i, 0)
            j = i + 1
            s_j = self.s[j]
        frac = (s - self.s[i]) / (s_j - self.s[i])
        return i, j, float(frac)

    def curvature_at(self, s: float) -> float:
        i, j, f = self._bracket(s)
        return float((1.0 - f) * self.kappa[i] + f * self.kappa[j])

    def point_at(self, s: float) -> tuple[float, float, float]:
        """Interpolated ``(x, y, heading)`` at arc length ``s``."""
        i, j, f = self._bracket(s)
        x = (1.0 - f) * self.x[i] + f * self.x[j]
        y = (1.0 - f) * self.y[i] + f * self.y[j]
        dh = self.heading[j] - self.heading[i]
        dh = (dh + math.pi) % (2.0 * math.pi) - math.pi
        return float(x), float(y), float(self.heading[i] + f * dh)

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Polyline segment start/end coordinates, including the closing one."""
        if self.closed:
            x1 = np.roll(self.x, -1)
            y1 = np.roll(self.y, -1)
            return self.x, self.y, x1, y1
        return self.x[:-1], self.y[:-1], self.x[1:], self.y[1:]

    def project(
        self,
        x: float,
        y: float,
        s_hint: float | None = None,
        window: float | None = None,
        max_distance: float = 50.0,
    ) -> tuple[float, float]:
        """Nearest point on the polyline.

        Returns ``(s, signed_offset)`` with the offset positive to the left
        of the path direction. With ``s_hint`` and ``window`` only segments
        within ``window`` metres of the hint are searched, which keeps the
        projection from jumping across a closed loop.

        Raises:
            OffPathError: the nearest point is farther than ``max_distance``.
        """
        x0, y0, x1, y1 = self.segments()
        seg_s = self.s[: len(x0)]
        if s_hint is not None and window is not None and window < self.length:
            if self.closed:
                d = np.abs((seg_s - s_hint + self.length / 2.0) % self.length - self.length / 2.0)
            else:
                d = np.abs(seg_s - s_hint)
            idx = np.nonzero(d <= window + self.ds)[0]
            if len(idx) == 0:
                idx = np.arange(len(x0))
        else:
            idx = np.arange(len(x0))
        ax, ay = x0[idx], y0[idx]
        ex, ey = x1[idx] - ax, y1[idx] - ay
        seg_len2 = ex * ex + ey * ey
        t = np.clip(((x - ax) * ex + (y - ay) * ey) / seg_len2, 0.0, 1.0)
        px, py = ax + t * ex, ay + t * ey
        dist2 = (x - px) ** 2 + (y - py) ** 2
        k = int(np.argmin(dist2))
        dist = math.sqrt(float(dist2[k]))
        if dist > max_distance:
            raise OffPathError(f"vehicle is {dist:.1f} m from the path (limit {max_distance:g} m)")
        seg = idx[k]
        seg_length = math.sqrt(float(seg_len2[k]))
        s = float(seg_s[seg] + t[k] * seg_length)
        cross = ex[k] * (y - ay[k]) - ey[k] * (x - ax[k])
        offset = math.copysign(dist, cross) if dist > 0 else 0.0
        if self.closed:
            s %= self.length
        return s, offset

    def lateral_distance(self, x: float, y: float) -> float:
        """Unsigned distance to the path, refined on a local parabola.

        The nearest polyline point is found globally; the three stations
        around it are then fitted with a parabola in the local tangent
        frame, which removes the chord sag of the polyline on curves.
        """
        s, offset = self.project(x, y, max_distance=math.inf)
        n = len(self.s)
        i = int(round(s / self.ds))
        if self.closed:
            idx = [(i - 1) % n, i % n, (i + 1) % n]
        else:
            i = min(max(i, 1), n - 2)
            idx = [i - 1, i, i + 1]
        h = self.heading[idx[1]]
        c, sn = math.cos(h), math.sin(h)
        px = self.x[idx] - self.x[idx[1]]
        py = self.y[idx] - self.y[idx[1]]
        xi = c * px + sn * py
        eta = -sn * px + c * py
        if np.ptp(xi) <= 1e-12 or len(set(np.round(xi, 12))) < 3:
            return abs(offset)
        a, b, c0 = np.polyfit(xi, eta, 2)
        vx, vy = x - self.x[idx[1]], y - self.y[idx[1]]
        qx = c * vx + sn * vy
        qy = -sn * vx + c * vy
        # Newton on the squared distance to eta = a xi^2 + b xi + c0
        t = qx
        for _ in range(20):
            p = a * t * t + b * t + c0
            dp = 2.0 * a * t + b
            g = (t - qx) + (p - qy) * dp
            hss = 1.0 + dp * dp + (p - qy) * 2.0 * a
            if hss <= 0:
                break
            step = g / hss
            t -= step
            if abs(step) < 1e-13:
                break
        d = math.hypot(t - qx, a * t * t + b * t + c0 - qy)
        return d


def _menger(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Signed curvature of the circle through each consecutive point triple."""
    ux, uy = x[1:-1] - x[:-2], y[1:-1] - y[:-2]
    vx, vy = x[2:] - x[:-2], y[2:] - y[:-2]
    a = np.hypot(ux, uy)
    b = np.hypot(x[2:] - x[1:-1], y[2:] - y[1:-1])
    c = np.hypot(vx, vy)
    cross = ux * vy - uy * vx
    return 2.0 * cross / (a * b * c)


def build_path(waypoints, closed: bool = False, ds: float = DEFAULT_DS) -> PathGeometry:
    """Resample waypoints at uniform arc length and attach curvature.

    Positions are interpolated with a cubic spline in chord-length
    parameter (periodic for closed paths), then re-parameterized so the
    station spacing is uniform and no larger than ``ds``. Curvature is the
    circumscribed-circle curvature of each station and its two neighbours.

    Raises:
        InsufficientPointsError: fewer than three distinct waypoints.
        DegenerateGeometryError: repeated consecutive waypoints.
    """
    if ds <= 0 or not math.isfinite(ds):
        raise ValueError(f"ds must be positive, got {ds}")
    pts = np.asarray(waypoints, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("waypoints must be an (n, 2) array")
    if closed and len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 3:
        raise InsufficientPointsError(f"need at least 3 waypoints, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise DegenerateGeometryError("waypoints contain non-finite values")

    if closed:
        pts = np.vstack([pts, pts[:1]])
    chord = np.hypot(np.diff(pts[:, 0]), np.diff(pts[:, 1]))
    if np.any(chord <= 1e-12):
        bad = int(np.nonzero(chord <= 1e-12)[0][0])
        raise DegenerateGeometryError(f"duplicate consecutive waypoints at index {bad}")
    u = np.concatenate([[0.0], np.cumsum(chord)])
    spline = CubicSpline(u, pts, bc_type="periodic" if closed else "not-a-knot")

    # arc length of the spline itself, by dense quadrature
    dense_n = max(int(math.ceil(u[-1] / min(ds, 1.0))) * 8, 64)
    ud = np.linspace(0.0, u[-1], dense_n + 1)
    pd = spline(ud)
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(pd[:, 0]), np.diff(pd[:, 1])))])
    total = float(arc[-1])

    n_seg = max(int(math.ceil(total / ds - 1e-9)), 2)
    s = np.linspace(0.0, total, n_seg + 1)
    us = np.interp(s, arc, ud)
    p = spline(us)
    dp = spline(us, 1)
    if closed:
        s, p, dp = s[:-1], p[:-1], dp[:-1]
    x, y = p[:, 0].copy(), p[:, 1].copy()
    heading = np.unwrap(np.arctan2(dp[:, 1], dp[:, 0]))

    if closed:
        xe = np.concatenate([x[-1:], x, x[:1]])
        ye = np.concatenate([y[-1:], y, y[:1]])
        kappa = _menger(xe, ye)
    else:
        kappa = np.empty_like(x)
        kappa[1:-1] = _menger(x, y)
        kappa[0] = kappa[1]
        kappa[-1] = kappa[-2]
    return PathGeometry(s=s, x=x, y=y, heading=heading, kappa=kappa, closed=closed, length=total)


def curvature_at(path: PathGeometry, s: float) -> float:
    return path.curvature_at(s)


# -- fixture routes -----------------------------------------------------------


def straight_waypoints(length: float, spacing: float = 1.0) -> np.ndarray:
    n = max(int(math.ceil(length / spacing)), 2)
    xs = np.linspace(0.0, length, n + 1)
    return np.column_stack([xs, np.zeros_like(xs)])


def circle_waypoints(radius: float, step_deg: float = 1.0) -> np.ndarray:
    th = np.deg2rad(np.arange(0.0, 360.0, step_deg))
    return np.column_stack([radius * np.cos(th), radius * np.sin(th)])


def rounded_rectangle_waypoints(
    straight: float = 300.0, radius: float = 30.0, spacing: float = 0.5
) -> np.ndarray:
    """Closed lap: two straights joined by two semicircles, counter-clockwise.

    Starts at the beginning of the lower straight, heading +x.
    """
    n_s = int(math.ceil(straight / spacing))
    n_c = int(math.ceil(math.pi * radius / spacing))
    lower = np.column_stack([np.linspace(0.0, straight, n_s + 1)[:-1], np.zeros(n_s)])
    th = np.linspace(-math.pi / 2, math.pi / 2, n_c + 1)[:-1]
    right = np.column_stack([straight + radius * np.cos(th), radius + radius * np.sin(th)])
    upper = np.column_stack(
        [np.linspace(straight, 0.0, n_s + 1)[:-1], np.full(n_s, 2.0 * radius)]
    )
    th = np.linspace(math.pi / 2, 3 * math.pi / 2, n_c + 1)[:-1]
    left = np.column_stack([radius * np.cos(th), radius + radius * np.sin(th)])
    return np.vstack([lower, right, upper, left])


def s_curve_waypoints(
    lead: float = 50.0, radius: float = 40.0, sweep_deg: float = 60.0, spacing: float = 0.5
) -> np.ndarray:
    """Open route: straight, left arc, right arc, straight."""
    sweep = math.radians(sweep_deg)
    pts = [np.column_stack([np.arange(0.0, lead, spacing), np.zeros(int(math.ceil(lead / spacing)))])]
    x0, y0, h = lead, 0.0, 0.0
    for sign in (1.0, -1.0):
        n = int(math.ceil(radius * sweep / spacing))
        cx, cy = x0 - sign * radius * math.sin(h), y0 + sign * radius * math.cos(h)
        a = np.linspace(0.0, sweep, n + 1)[:-1]
        ang = h - sign * math.pi / 2 + sign * a
        pts.append(np.column_stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)]))
        h = h + sign * sweep
        x0 = cx + radius * math.cos(h - sign * math.pi / 2)
        y0 = cy + radius * math.sin(h - sign * math.pi / 2)
    n = int(math.ceil(lead / spacing))
    t = np.linspace(0.0, lead, n + 1)
    pts.append(np.column_stack([x0 + t * math.cos(h), y0 + t * math.sin(h)]))
    return np.vstack(pts)
