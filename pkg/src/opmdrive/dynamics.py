"""Single-track (bicycle) vehicle model with first-order actuator lag."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Literal

import numpy as np

from opmdrive import _backend
from opmdrive._core_py import AX, DYNAMIC_MIN_SPEED, R, STEER, VX, VY, X, Y, YAW
from opmdrive.errors import ConfigError

Model = Literal["kinematic", "dynamic"]

STEER_LIMIT_DEG = 32.0
MAX_DT = 0.05


@dataclass(frozen=True)
class VehicleParameters:
    """Vehicle constants in SI units.

    Cornering stiffnesses are per axle in N/rad. Lag constants of zero
    make the corresponding actuator follow its command instantly.
    """

    m: float = 1740.0
    Iz: float = 3000.0
    lf: float = 1.4
    lr: float = 1.65
    Caf: float = 81000.0
    Car: float = 81000.0
    steer_limit: float = math.radians(STEER_LIMIT_DEG)
    steer_lag_tau: float = 0.2
    accel_lag_tau: float = 0.4

    def __post_init__(self) -> None:
        for f in fields(self):
            val = getattr(self, f.name)
            if not math.isfinite(val):
                raise ConfigError(f"{f.name} must be finite")
            if f.name.endswith("_tau"):
                if val < 0:
                    raise ConfigError(f"{f.name} must be non-negative")
            elif val <= 0:
                raise ConfigError(f"{f.name} must be positive")

    @property
    def wheelbase(self) -> float:
        return self.lf + self.lr

    def kernel_params(self) -> tuple[float, ...]:
        return (self.m, self.Iz, self.lf, self.lr, self.Caf, self.Car,
                self.steer_lag_tau, self.accel_lag_tau)

    @classmethod
    def from_mapping(cls, data: dict) -> "VehicleParameters":
        """Build from a config table.

        ``stiffness_unit = "per_deg"`` converts ``Caf``/``Car`` from N/deg;
        the default ``"per_rad"`` takes them as given.
        """
        data = dict(data)
        unit = data.pop("stiffness_unit", "per_rad")
        if "steer_limit_deg" in data:
            data["steer_limit"] = math.radians(float(data.pop("steer_limit_deg")))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown vehicle parameters: {sorted(unknown)}")
        params = cls(**{k: float(v) for k, v in data.items()})
        if unit == "per_deg":
            scale = 180.0 / math.pi
            params = replace(params, Caf=params.Caf * scale, Car=params.Car * scale)
        elif unit != "per_rad":
            raise ConfigError(f"stiffness_unit must be per_rad or per_deg, got {unit!r}")
        return params

    def to_mapping(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    yaw_rate: float = 0.0
    steer_actual: float = 0.0
    ax_actual: float = 0.0

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.yaw, self.vx, self.vy,
                         self.yaw_rate, self.steer_actual, self.ax_actual])

    @classmethod
    def from_array(cls, a) -> "VehicleState":
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class ControlCommand:
    steer_cmd: float = 0.0
    ax_cmd: float = 0.0


def step(
    state: VehicleState,
    cmd: ControlCommand,
    params: VehicleParameters,
    dt: float,
    model: Model = "kinematic",
) -> VehicleState:
    """Advance one fixed RK4 step.

    The steering command is clamped to the steering limit before the lag,
    and ``vx`` is floored at zero since there is no reverse. Below 2 m/s the dynamic model falls back to kinematic, where the
    linear tyre model is singular.
    """
    return VehicleState.from_array(step_array(state.to_array(), cmd.steer_cmd, cmd.ax_cmd, params, dt, model))


def step_array(
    state: np.ndarray, steer_cmd: float, ax_cmd: float, params: VehicleParameters,
    dt: float, model: Model = "kinematic",
) -> np.ndarray:
    """Array form of :func:`step` used by the simulation loop."""
    if not (0.0 < dt <= MAX_DT):
        raise ValueError(f"dt must be in (0, {MAX_DT}], got {dt}")
    if not (math.isfinite(steer_cmd) and math.isfinite(ax_cmd)):
        raise ValueError(f"non-finite command ({steer_cmd}, {ax_cmd})")
    if model not in ("kinematic", "dynamic"):
        raise ValueError(f"unknown model {model!r}")
    out = np.asarray(_backend.rk4_step(
        state, float(steer_cmd), float(ax_cmd), params.kernel_params(),
        params.steer_limit, float(dt), model == "dynamic",
    ))
    if out[VX] < 0.0:
        # no reverse gear: the brake holds the vehicle at rest
        out[VX] = 0.0
    return out


def lateral_acceleration(state: np.ndarray, params: VehicleParameters, model: Model = "kinematic") -> float:
    """Body-frame lateral acceleration ``vy_dot + vx * yaw_rate``."""
    dynamic = model == "dynamic" and state[VX] >= DYNAMIC_MIN_SPEED
    d = _backend.bicycle_deriv(state, state[STEER], state[AX], params.kernel_params(), dynamic)
    return float(d[VY] + state[VX] * state[R])


__all__ = [
    "AX", "R", "STEER", "VX", "VY", "X", "Y", "YAW",
    "ControlCommand", "VehicleParameters", "VehicleState",
    "lateral_acceleration", "step", "step_array",
]
