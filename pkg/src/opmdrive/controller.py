"""Integrated path and speed tracking.

Lateral: pure pursuit toward a point a speed-scheduled arc distance ahead
of the vehicle's projection on the path. Longitudinal: planned
acceleration as feedforward plus PI on speed error, optionally clamped to
the occupant's acceleration box with the integrator frozen while clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from opmdrive.dynamics import VX, X, Y, YAW, ControlCommand, VehicleParameters, VehicleState
from opmdrive.errors import ConfigError, OutOfRangeError
from opmdrive.opm import OccupantPreferenceMetric
from opmdrive.path import PathGeometry
from opmdrive.planner import VelocityProfile

OFF_PATH_LIMIT = 50.0


@dataclass(frozen=True)
class ControllerConfig:
    """Tracking gains.

    ``preview_time`` compensates the acceleration lag: the feedforward is
    read ``vx * preview_time`` metres ahead and the speed reference half
    that distance ahead, which keeps braking from starting late.
    """

    lookahead_base: float = 2.0
    lookahead_gain: float = 0.3
    kp_speed: float = 0.8
    ki_speed: float = 0.2
    preview_time: float = 0.4
    opm_clamp: bool = True

    def __post_init__(self) -> None:
        if not self.lookahead_base > 0:
            raise ConfigError("lookahead_base must be positive")
        for name in ("lookahead_gain", "kp_speed", "ki_speed", "preview_time"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    def lookahead(self, vx: float) -> float:
        return self.lookahead_base + self.lookahead_gain * max(vx, 0.0)


def _as_array(state) -> np.ndarray:
    return state.to_array() if isinstance(state, VehicleState) else np.asarray(state, dtype=float)


def _target_point(path: PathGeometry, s: float) -> tuple[float, float]:
    if path.closed or s <= path.length:
        x, y, _ = path.point_at(s if path.closed else max(s, 0.0))
        return x, y
    # past the end of an open path: extend along the final heading
    x, y, h = path.point_at(path.length)
    extra = s - path.length
    return x + extra * math.cos(h), y + extra * math.sin(h)


def pure_pursuit_steer(
    state, path: PathGeometry, s_proj: float, cfg: ControllerConfig, params: VehicleParameters
) -> float:
    st = _as_array(state)
    ell = cfg.lookahead(st[VX])
    tx, ty = _target_point(path, s_proj + ell)
    dx, dy = tx - st[X], ty - st[Y]
    c, s = math.cos(st[YAW]), math.sin(st[YAW])
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    dist = math.hypot(lx, ly)
    if dist < 1e-9:
        return 0.0
    alpha = math.atan2(ly, lx)
    steer = math.atan(2.0 * params.wheelbase * math.sin(alpha) / dist)
    return max(-params.steer_limit, min(params.steer_limit, steer))


def lateral_control(
    state,
    path: PathGeometry,
    cfg: ControllerConfig,
    params: VehicleParameters | None = None,
    s_hint: float | None = None,
) -> float:
    """Steering command [rad], left positive.

    Raises:
        OffPathError: the vehicle is more than 50 m from the path.
    """
    params = params or VehicleParameters()
    st = _as_array(state)
    window = None if s_hint is None else 10.0 + cfg.lookahead(st[VX])
    s_proj, _ = path.project(st[X], st[Y], s_hint=s_hint, window=window, max_distance=OFF_PATH_LIMIT)
    return pure_pursuit_steer(st, path, s_proj, cfg, params)


def _profile_lookup(profile: VelocityProfile, s_now: float) -> tuple[float, float]:
    tol = 1e-6 * max(1.0, float(profile.s[-1]))
    if s_now < profile.s[0] - tol or s_now > profile.s[-1] + tol:
        raise OutOfRangeError(
            f"s={s_now:.3f} outside profile range [{profile.s[0]:.3f}, {profile.s[-1]:.3f}]"
        )
    return profile.at(s_now)


def _reference(profile: VelocityProfile, s_now: float, vx: float, cfg: ControllerConfig) -> tuple[float, float]:
    ahead = max(vx, 0.0) * cfg.preview_time
    end = float(profile.s[-1])
    v_ref = profile.at(min(s_now + 0.5 * ahead, end))[0]
    a_ff = profile.at(min(s_now + ahead, end))[1]
    return v_ref, a_ff


def longitudinal_control(
    state,
    profile: VelocityProfile,
    s_now: float,
    cfg: ControllerConfig,
    opm: OccupantPreferenceMetric,
    integral: float = 0.0,
) -> float:
    """Acceleration command [m/s^2] for a given integrator value.

    Raises:
        OutOfRangeError: ``s_now`` is outside the profile.
    """
    st = _as_array(state)
    _profile_lookup(profile, s_now)  # range check
    v_ref, a_ff = _reference(profile, s_now, st[VX], cfg)
    ax = a_ff + cfg.kp_speed * (v_ref - st[VX]) + cfg.ki_speed * integral
    if cfg.opm_clamp:
        ax = min(max(ax, opm.ax_neg), opm.ax_pos)
    return ax


class TrackingController:
    """Stateful controller for one simulation run.

    Holds the speed-error integrator and the last projection, which is
    used as a search hint so closed laps never jump across the track.
    """

    def __init__(
        self,
        path: PathGeometry,
        profile: VelocityProfile,
        cfg: ControllerConfig,
        opm: OccupantPreferenceMetric,
        params: VehicleParameters | None = None,
    ):
        self.path = path
        self.profile = profile
        self.cfg = cfg
        self.opm = opm
        self.params = params or VehicleParameters()
        self.integral = 0.0
        self.s_hint: float | None = None
        self.progress = 0.0  # arc length travelled, unwrapped across laps
        self.lateral_error = 0.0

    def localize(self, state) -> float:
        """Project the vehicle on the path and update lap progress."""
        st = _as_array(state)
        window = None if self.s_hint is None else 10.0 + self.cfg.lookahead(st[VX])
        s, offset = self.path.project(
            st[X], st[Y], s_hint=self.s_hint, window=window, max_distance=OFF_PATH_LIMIT
        )
        if self.s_hint is None:
            self.progress = s
        else:
            ds = s - self.s_hint
            if self.path.closed:
                L = self.path.length
                ds = (ds + L / 2.0) % L - L / 2.0
            self.progress += ds
        self.s_hint = s
        self.lateral_error = offset
        return s

    def step(self, state, dt: float) -> ControlCommand:
        st = _as_array(state)
        s_proj = self.localize(st)
        steer = pure_pursuit_steer(st, self.path, s_proj, self.cfg, self.params)
        s_ref = min(max(self.progress, float(self.profile.s[0])), float(self.profile.s[-1]))
        v_ref, a_ff = _reference(self.profile, s_ref, st[VX], self.cfg)
        err = v_ref - st[VX]
        raw = a_ff + self.cfg.kp_speed * err + self.cfg.ki_speed * self.integral
        ax = raw
        if self.cfg.opm_clamp:
            ax = min(max(raw, self.opm.ax_neg), self.opm.ax_pos)
        # anti-windup: integrate only while unsaturated
        if ax == raw:
            self.integral += err * dt
        return ControlCommand(steer_cmd=steer, ax_cmd=ax)


def control_step(
    state,
    path: PathGeometry,
    profile: VelocityProfile,
    cfg: ControllerConfig,
    opm: OccupantPreferenceMetric,
    params: VehicleParameters | None = None,
) -> ControlCommand:
    """Stateless single command (fresh integrator, global projection)."""
    ctl = TrackingController(path, profile, cfg, opm, params)
    return ctl.step(state, dt=0.0)


__all__ = [
    "ControllerConfig",
    "TrackingController",
    "control_step",
    "lateral_control",
    "longitudinal_control",
    "pure_pursuit_steer",
]
