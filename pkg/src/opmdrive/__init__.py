"""Occupant-preference-aware velocity planning and vehicle simulation.

The comfort region is a five-number metric (acceleration, deceleration,
lateral acceleration and the two jerk limits). Planners produce speed
profiles and lane-change paths inside it; the simulator closes the loop
with a bicycle model; the analysis module audits logs against it.
"""

from opmdrive._backend import BACKEND
from opmdrive.opm import (
    OPM1,
    OPM2,
    DrivingStyle,
    OccupantPreferenceMetric,
    contains_acceleration,
    contains_jerk,
    parse_opm,
    preset,
    validate_opm,
)
from opmdrive.path import PathGeometry, build_path, curvature_at

__all__ = [
    "BACKEND",
    "OPM1",
    "OPM2",
    "DrivingStyle",
    "OccupantPreferenceMetric",
    "PathGeometry",
    "build_path",
    "contains_acceleration",
    "contains_jerk",
    "curvature_at",
    "parse_opm",
    "preset",
    "validate_opm",
]
