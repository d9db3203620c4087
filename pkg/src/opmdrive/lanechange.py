"""Constant-speed lane changes along a quintic lateral profile.

The lateral offset over the manoeuvre length ``L`` is

    y(s) = w * (10 xi^3 - 15 xi^4 + 6 xi^5),   xi = s / L,

which starts and ends with zero slope and zero curvature, so it joins
straight lanes without a curvature jump. Driven at constant speed ``v``
the peak lateral acceleration and jerk are ``C2 |w| v^2 / L^2`` and
``C3 |w| v^3 / L^3``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from opmdrive.errors import InvalidRequestError, PreconditionError
from opmdrive.opm import OccupantPreferenceMetric
from opmdrive.path import PathGeometry

# max |d2/dxi2| and |d3/dxi3| of the unit shape (at xi = 1/2 -+ sqrt(3)/6 and xi = 0, 1)
C2 = 10.0 / math.sqrt(3.0)
C3 = 60.0


@dataclass(frozen=True)
class LaneChangeRequest:
    v: float
    lane_offset: float
    gap_free_length: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and self.v > 0):
            raise InvalidRequestError(f"speed must be positive, got {self.v}")
        if not math.isfinite(self.lane_offset) or self.lane_offset == 0:
            raise InvalidRequestError("lane offset must be non-zero")
        if not self.gap_free_length > 0:
            raise InvalidRequestError("gap_free_length must be positive")


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    length: float
    reason: str = ""

    def __bool__(self) -> bool:
        return self.feasible


@dataclass(frozen=True, eq=False)
class LaneChangePlan:
    length: float
    path: PathGeometry
    max_ay: float
    max_jy: float
    v: float
    lane_offset: float


def shape(xi):
    xi = np.asarray(xi, dtype=float)
    return xi**3 * (10.0 - 15.0 * xi + 6.0 * xi**2)


def shape_d1(xi):
    xi = np.asarray(xi, dtype=float)
    return 30.0 * xi**2 * (1.0 - xi) ** 2


def shape_d2(xi):
    xi = np.asarray(xi, dtype=float)
    return 60.0 * xi * (1.0 - xi) * (1.0 - 2.0 * xi)


def shape_d3(xi):
    xi = np.asarray(xi, dtype=float)
    return 60.0 * (1.0 - 6.0 * xi + 6.0 * xi**2)


def min_lane_change_length(v: float, w: float, opm: OccupantPreferenceMetric) -> float:
    """Shortest manoeuvre keeping peak lateral acceleration and jerk in bounds.

    ``opm.jy_abs = inf`` drops the jerk condition.
    """
    if not (math.isfinite(v) and v > 0):
        raise InvalidRequestError(f"speed must be positive, got {v}")
    if not math.isfinite(w) or w == 0:
        raise InvalidRequestError("lane offset must be non-zero")
    by_accel = v * math.sqrt(C2 * abs(w) / opm.ay_abs)
    by_jerk = v * (C3 * abs(w) / opm.jy_abs) ** (1.0 / 3.0)
    return max(by_accel, by_jerk)


def check_feasibility(req: LaneChangeRequest, opm: OccupantPreferenceMetric) -> Feasibility:
    length = min_lane_change_length(req.v, req.lane_offset, opm)
    if length <= req.gap_free_length:
        return Feasibility(True, length)
    return Feasibility(
        False,
        length,
        f"corridor-too-short: need {length:.2f} m, have {req.gap_free_length:.2f} m",
    )


def generate_lane_change_path(
    req: LaneChangeRequest,
    opm: OccupantPreferenceMetric,
    ds: float = 0.5,
    length: float | None = None,
    dense: int = 20001,
) -> LaneChangePlan:
    """Lane-change geometry in a frame aligned with the current lane.

    The target point is placed at the minimum feasible length unless
    ``length`` is given. Stations are spaced uniformly in arc length at
    no more than ``ds``; heading and curvature are exact for the quintic.
    Reported peaks are measured on a dense sampling of the lateral motion
    at constant speed.

    Raises:
        PreconditionError: the request is infeasible for this metric, or
            ``length`` is shorter than the minimum.
    """
    feas = check_feasibility(req, opm)
    if not feas:
        raise PreconditionError(f"lane change infeasible ({feas.reason})")
    L = feas.length if length is None else float(length)
    if L < feas.length * (1.0 - 1e-12):
        raise PreconditionError(f"length {L:.3f} m is below the minimum {feas.length:.3f} m")
    w = req.lane_offset

    # arc length of the curve as a function of the longitudinal coordinate
    xs = np.linspace(0.0, L, dense)
    slope = w / L * shape_d1(xs / L)
    speed = np.sqrt(1.0 + slope**2)
    arc = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.diff(xs))])
    n_seg = max(int(math.ceil(arc[-1] / ds - 1e-9)), 2)
    s = np.linspace(0.0, arc[-1], n_seg + 1)
    x = np.interp(s, arc, xs)
    xi = x / L
    y = w * shape(xi)
    d1 = w / L * shape_d1(xi)
    d2 = w / L**2 * shape_d2(xi)
    heading = np.arctan(d1)
    kappa = d2 / (1.0 + d1**2) ** 1.5
    path = PathGeometry(s=s, x=x, y=y, heading=heading, kappa=kappa, closed=False, length=float(arc[-1]))

    xi_d = np.linspace(0.0, 1.0, dense)
    v = req.v
    max_ay = float(np.max(np.abs(w * v**2 / L**2 * shape_d2(xi_d))))
    max_jy = float(np.max(np.abs(w * v**3 / L**3 * shape_d3(xi_d))))
    return LaneChangePlan(length=L, path=path, max_ay=max_ay, max_jy=max_jy, v=v, lane_offset=w)


def write_plan_csv(plan: LaneChangePlan, dest: str | Path) -> None:
    p = plan.path
    with open(dest, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "x", "y", "heading", "kappa"])
        for row in zip(p.s, p.x, p.y, p.heading, p.kappa):
            w.writerow([repr(float(v)) for v in row])
        w.writerow(["L", "max_ay", "max_jy"])
        w.writerow([repr(plan.length), repr(plan.max_ay), repr(plan.max_jy)])


def read_plan_csv(src: str | Path) -> tuple[PathGeometry, dict[str, float]]:
    rows, summary = [], {}
    with open(src, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["s", "x", "y", "heading", "kappa"]:
            raise ValueError(f"unexpected header {header}")
        for row in reader:
            if row and row[0] == "L":
                vals = next(reader)
                summary = dict(zip(row, map(float, vals)))
                break
            rows.append([float(v) for v in row])
    a = np.asarray(rows)
    path = PathGeometry(s=a[:, 0], x=a[:, 1], y=a[:, 2], heading=a[:, 3], kappa=a[:, 4])
    return path, summary
