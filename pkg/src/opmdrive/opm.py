"""Occupant preference metric: five comfort thresholds and style presets."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from enum import IntEnum
from typing import Iterable

from opmdrive.errors import InvalidMetricError


class DrivingStyle(IntEnum):
    """Driving styles ordered from calmest to most aggressive.

    The integer order is meaningful: each preset region contains the
    regions of all calmer styles.
    """

    PublicTransport = 0
    Normal = 1
    Aggressive = 2
    ExtremelyAggressive = 3

    @classmethod
    def from_name(cls, name: str) -> "DrivingStyle":
        key = name.replace("_", "").replace("-", "").replace(" ", "").lower()
        for style in cls:
            if style.name.lower() == key:
                return style
        # common short forms
        aliases = {
            "public": cls.PublicTransport,
            "cautious": cls.PublicTransport,
            "extreme": cls.ExtremelyAggressive,
        }
        if key in aliases:
            return aliases[key]
        raise InvalidMetricError(f"unknown driving style {name!r}")


@dataclass(frozen=True)
class OccupantPreferenceMetric:
    """Comfort region for a vehicle occupant, in SI units.

    Attributes:
        ax_pos: Longitudinal acceleration threshold [m/s^2], positive.
        ax_neg: Longitudinal deceleration threshold [m/s^2], stored negative.
        ay_abs: Lateral acceleration magnitude threshold [m/s^2].
        jx_abs: Longitudinal jerk magnitude threshold [m/s^3].
        jy_abs: Lateral jerk magnitude threshold [m/s^3].

    ``math.inf`` is accepted for the jerk thresholds and means "unbounded".
    Construct through :func:`validate_opm` to get sign normalization.
    """

    ax_pos: float
    ax_neg: float
    ay_abs: float
    jx_abs: float
    jy_abs: float

    def __post_init__(self) -> None:
        for name, value in zip(_FIELDS, astuple(self)):
            if math.isnan(value):
                raise InvalidMetricError(f"{name} is NaN")
        if not (self.ax_pos > 0 and math.isfinite(self.ax_pos)):
            raise InvalidMetricError(f"ax_pos must be positive and finite, got {self.ax_pos}")
        if not (self.ax_neg < 0 and math.isfinite(self.ax_neg)):
            raise InvalidMetricError(f"ax_neg must be negative and finite, got {self.ax_neg}")
        if not (self.ay_abs > 0 and math.isfinite(self.ay_abs)):
            raise InvalidMetricError(f"ay_abs must be positive and finite, got {self.ay_abs}")
        if not self.jx_abs > 0:
            raise InvalidMetricError(f"jx_abs must be positive, got {self.jx_abs}")
        if not self.jy_abs > 0:
            raise InvalidMetricError(f"jy_abs must be positive, got {self.jy_abs}")

    def as_list(self) -> list[float]:
        """Config-file order ``[ax_pos, ax_neg, ay_abs, jx_abs, jy_abs]``."""
        return list(astuple(self))

    def __str__(self) -> str:
        return "{%g, %g, |%g|, |%g|, |%g|}" % astuple(self)


_FIELDS = ("ax_pos", "ax_neg", "ay_abs", "jx_abs", "jy_abs")


def validate_opm(raw: Iterable[float] | OccupantPreferenceMetric) -> OccupantPreferenceMetric:
    """Normalize five numbers into a metric.

    The second element may be given as a magnitude; a positive value is
    read as a deceleration and negated. Magnitudes are taken for the
    lateral and jerk entries.

    Raises:
        InvalidMetricError: wrong arity, a zero or non-finite threshold
            (jerks may be ``inf``).
    """
    if isinstance(raw, OccupantPreferenceMetric):
        return raw
    values = [float(v) for v in raw]
    if len(values) != 5:
        raise InvalidMetricError(f"expected 5 thresholds, got {len(values)}")
    ax_pos, ax_neg, ay, jx, jy = values
    for name, v in zip(_FIELDS[:3], (ax_pos, ax_neg, ay)):
        if not math.isfinite(v):
            raise InvalidMetricError(f"{name} must be finite, got {v}")
    for name, v in zip(_FIELDS[3:], (jx, jy)):
        if math.isnan(v):
            raise InvalidMetricError(f"{name} is NaN")
    if ax_pos == 0 or ax_neg == 0 or ay == 0 or jx == 0 or jy == 0:
        raise InvalidMetricError("a zero threshold leaves an empty comfort region")
    return OccupantPreferenceMetric(
        ax_pos=abs(ax_pos),
        ax_neg=-abs(ax_neg),
        ay_abs=abs(ay),
        jx_abs=abs(jx),
        jy_abs=abs(jy),
    )


def contains_acceleration(opm: OccupantPreferenceMetric, ax: float, ay: float) -> bool:
    """Closed-box membership test on the G-G plane."""
    return opm.ax_neg <= ax <= opm.ax_pos and abs(ay) <= opm.ay_abs


def contains_jerk(opm: OccupantPreferenceMetric, jx: float, jy: float) -> bool:
    return abs(jx) <= opm.jx_abs and abs(jy) <= opm.jy_abs


# ExtremelyAggressive lateral/jerk entries are synthetic fixture values.
_PRESETS = {
    DrivingStyle.PublicTransport: (0.93, -0.93, 0.93, 0.6, 0.6),
    DrivingStyle.Normal: (2.0, -2.0, 2.0, 0.9, 0.9),
    DrivingStyle.Aggressive: (3.07, -5.08, 4.0, 2.0, 2.0),
    DrivingStyle.ExtremelyAggressive: (4.0, -5.1, 5.0, 3.0, 3.0),
}

# Simulated occupants: cautious and dynamic.
OPM1 = validate_opm((0.9, 0.9, 0.9, 0.6, 0.6))
OPM2 = validate_opm((2.2, -2.5, 3.5, 1.5, 1.5))


def preset(style: DrivingStyle | str) -> OccupantPreferenceMetric:
    if isinstance(style, str):
        style = DrivingStyle.from_name(style)
    return validate_opm(_PRESETS[DrivingStyle(style)])


def parse_opm(text: str | Iterable[float]) -> OccupantPreferenceMetric:
    """Parse a preset name, ``opm1``/``opm2``, or five numbers.

    Numbers may be separated by commas or whitespace and optionally
    wrapped in brackets, so both ``normal`` and ``"[0.9,-0.9,0.9,0.6,0.6]"``
    work.
    """
    if not isinstance(text, str):
        return validate_opm(text)
    stripped = text.strip().strip("[](){}")
    key = stripped.lower().replace("#", "")
    if key == "opm1":
        return OPM1
    if key == "opm2":
        return OPM2
    parts = [p for p in stripped.replace(",", " ").split() if p]
    if len(parts) == 5:
        try:
            return validate_opm(float(p) for p in parts)
        except ValueError as exc:
            if isinstance(exc, InvalidMetricError):
                raise
    return preset(stripped)
