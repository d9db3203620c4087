"""Closed-loop scenario runner: plan, track, log."""

from __future__ import annotations

import copy
import csv
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from opmdrive.compliance import TrajectoryLog
from opmdrive.controller import ControllerConfig, TrackingController
from opmdrive.dynamics import AX, STEER, VX, X, Y, YAW, Model, VehicleParameters, lateral_acceleration, step_array
from opmdrive.errors import ConfigError, OPMDriveError
from opmdrive.opm import OccupantPreferenceMetric, parse_opm, validate_opm
from opmdrive.path import DEFAULT_DS, PathGeometry, build_path
from opmdrive.planner import BoundaryConditions, VelocityProfile, plan_velocity

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SIM_DT = 0.01
LOG_RATE = 10.0
STOP_SPEED = 0.05
# the vehicle counts as arrived once stopped within this distance of the end
ARRIVAL_TOLERANCE = 1.0


@dataclass(frozen=True)
class Scenario:
    """Everything needed for one closed-loop run.

    ``log_noise`` adds seeded zero-mean Gaussian noise (m/s^2) to the
    logged accelerations, mimicking an accelerometer; the vehicle itself
    is noise free.
    """

    route_file: Path
    opm: OccupantPreferenceMetric
    vehicle: VehicleParameters = field(default_factory=VehicleParameters)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    bc: BoundaryConditions = field(default_factory=BoundaryConditions)
    duration_limit: float = 600.0
    seed: int = 0
    model: Model = "kinematic"
    closed: bool | None = None
    ds: float = DEFAULT_DS
    log_noise: float = 0.0
    name: str = "scenario"

    def __post_init__(self) -> None:
        object.__setattr__(self, "route_file", Path(self.route_file))
        if isinstance(self.opm, str):
            object.__setattr__(self, "opm", parse_opm(self.opm))
        elif not isinstance(self.opm, OccupantPreferenceMetric):
            object.__setattr__(self, "opm", validate_opm(self.opm))
        if not (math.isfinite(self.duration_limit) and self.duration_limit > 0):
            raise ConfigError("duration_limit must be positive")
        if self.model not in ("kinematic", "dynamic"):
            raise ConfigError(f"model must be kinematic or dynamic, got {self.model!r}")
        if not self.ds > 0:
            raise ConfigError("ds must be positive")
        if self.log_noise < 0:
            raise ConfigError("log_noise must be non-negative")
        if not self.route_file.is_file():
            raise FileNotFoundError(f"route file not found: {self.route_file}")


def read_route_csv(src: str | Path) -> tuple[np.ndarray, bool]:
    """Waypoints from a ``x,y`` CSV.

    A first line ``# closed=true`` marks a closed route.
    """
    closed = False
    with open(src, newline="") as fh:
        lines = fh.read().splitlines()
    if lines and lines[0].startswith("#"):
        key, _, val = lines[0].lstrip("#").strip().partition("=")
        if key.strip() == "closed":
            closed = val.strip().lower() in ("1", "true", "yes")
        lines = lines[1:]
    reader = csv.reader(lines)
    header = [h.strip() for h in next(reader, [])]
    if header[:2] != ["x", "y"]:
        raise ConfigError(f"route file {src} must start with an 'x,y' header, got {header}")
    pts = [(float(r[0]), float(r[1])) for r in reader if r and not r[0].startswith("#")]
    return np.asarray(pts, dtype=float).reshape(-1, 2), closed


def write_route_csv(waypoints, dest: str | Path, closed: bool = False) -> None:
    with open(dest, "w", newline="") as fh:
        if closed:
            fh.write("# closed=true\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in np.asarray(waypoints, dtype=float):
            w.writerow([repr(float(x)), repr(float(y))])


def load_route(src: str | Path, closed: bool | None = None, ds: float = DEFAULT_DS) -> PathGeometry:
    pts, file_closed = read_route_csv(src)
    return build_path(pts, closed=file_closed if closed is None else closed, ds=ds)


def _opm_from_config(raw) -> OccupantPreferenceMetric:
    if isinstance(raw, str):
        return parse_opm(raw)
    if isinstance(raw, dict):
        try:
            return validate_opm([raw[k] for k in ("ax_pos", "ax_neg", "ay_abs", "jx_abs", "jy_abs")])
        except KeyError as exc:
            raise ConfigError(f"opm table is missing {exc.args[0]}") from None
    return validate_opm(raw)


def load_scenario(src: str | Path) -> Scenario:
    """Read a TOML scenario file.

    Relative ``route`` paths resolve against the file's directory. The
    metric is given as ``opm = "normal"``, ``opm = [0.9, -0.9, 0.9, 0.6,
    0.6]`` or an ``[opm]`` table.

    Raises:
        FileNotFoundError: the config or the route file is missing.
        ConfigError: malformed content.
    """
    src = Path(src)
    with open(src, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{src}: {exc}") from exc
    known = {"route", "opm", "vehicle", "controller", "boundary", "duration_limit",
             "seed", "model", "closed", "ds", "log_noise", "name"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{src}: unknown keys {sorted(unknown)}")
    if "route" not in data or "opm" not in data:
        raise ConfigError(f"{src}: 'route' and 'opm' are required")
    try:
        return Scenario(
            route_file=(src.parent / data["route"]),
            opm=_opm_from_config(data["opm"]),
            vehicle=VehicleParameters.from_mapping(data.get("vehicle", {})),
            controller=ControllerConfig(**data.get("controller", {})),
            bc=BoundaryConditions(**data.get("boundary", {})),
            duration_limit=float(data.get("duration_limit", 600.0)),
            seed=int(data.get("seed", 0)),
            model=data.get("model", "kinematic"),
            closed=data.get("closed"),
            ds=float(data.get("ds", DEFAULT_DS)),
            log_noise=float(data.get("log_noise", 0.0)),
            name=str(data.get("name", src.stem)),
        )
    except TypeError as exc:
        raise ConfigError(f"{src}: {exc}") from exc


def _with_context(exc: OPMDriveError, scenario: Scenario) -> OPMDriveError:
    new = copy.copy(exc)
    new.args = (f"[{scenario.name}] {exc}",) + exc.args[1:]
    return new


@dataclass(frozen=True, eq=False)
class SimulationResult:
    log: TrajectoryLog
    path: PathGeometry
    profile: VelocityProfile
    reason: str


def simulate(scenario: Scenario) -> SimulationResult:
    """Plan and run one scenario; see :func:`run_simulation`."""
    try:
        path = load_route(scenario.route_file, scenario.closed, scenario.ds)
        profile = plan_velocity(path, scenario.opm, scenario.bc)
    except OPMDriveError as exc:
        raise _with_context(exc, scenario) from exc

    params = scenario.vehicle
    ctl = TrackingController(path, profile, scenario.controller, scenario.opm, params)
    x0, y0, h0 = path.point_at(0.0)
    state = np.zeros(8)
    state[X], state[Y], state[YAW], state[VX] = x0, y0, h0, scenario.bc.v_start

    n_max = int(round(scenario.duration_limit / SIM_DT))
    every = int(round(1.0 / (LOG_RATE * SIM_DT)))
    rows = []
    reason = "duration_limit"
    try:
        for k in range(n_max):
            if k % every == 0:
                ctl.localize(state)
                rows.append((k * SIM_DT, state[X], state[Y], state[YAW], state[VX],
                             state[AX], lateral_acceleration(state, params, scenario.model), state[STEER]))
                if _finished(ctl, path, state, scenario.bc):
                    reason = "route_end"
                    break
            cmd = ctl.step(state, SIM_DT)
            state = step_array(state, cmd.steer_cmd, cmd.ax_cmd, params, SIM_DT, scenario.model)
    except OPMDriveError as exc:
        raise _with_context(exc, scenario) from exc

    data = np.asarray(rows, dtype=float)
    if scenario.log_noise > 0:
        rng = np.random.default_rng(scenario.seed)
        data[:, 5:7] += rng.normal(0.0, scenario.log_noise, size=(len(data), 2))
    log.debug("%s: %d rows, stop reason %s", scenario.name, len(data), reason)
    return SimulationResult(TrajectoryLog(*data.T, rate=LOG_RATE), path, profile, reason)


def _finished(ctl: TrackingController, path: PathGeometry, state: np.ndarray, bc: BoundaryConditions) -> bool:
    remaining = path.length - ctl.progress
    if bc.v_end > 0.0:
        return remaining <= 0.0
    return remaining <= ARRIVAL_TOLERANCE and state[VX] < STOP_SPEED


def run_simulation(scenario: Scenario) -> TrajectoryLog:
    """Plan a profile, track it at 100 Hz and return the 10 Hz log.

    The run ends when the vehicle reaches the end of an open route or
    completes one lap of a closed one (stopping within 1 m of the end
    counts when the plan ends at rest), or at ``duration_limit``.

    Raises:
        InfeasibleError, OffPathError: with the scenario name prefixed.
    """
    return simulate(scenario).log


__all__ = [
    "Scenario",
    "SimulationResult",
    "load_route",
    "load_scenario",
    "read_route_csv",
    "run_simulation",
    "simulate",
    "write_route_csv",
]
