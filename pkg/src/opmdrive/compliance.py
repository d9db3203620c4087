"""Auditing of driving logs against an occupant preference metric."""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from opmdrive.errors import InsufficientDataError
from opmdrive.opm import (
    DrivingStyle,
    OccupantPreferenceMetric,
    contains_acceleration,
    contains_jerk,
    preset,
)
from opmdrive.path import PathGeometry

LOG_COLUMNS = ("t", "x", "y", "yaw", "v", "ax", "ay", "steer")
DEFAULT_RATE = 10.0
DEFAULT_JERK_WINDOW = 0.5
MIN_CLASSIFY_DURATION = 2.0
STYLE_PERCENTILE = 95.0
_UNIFORM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """Fixed-rate vehicle log.

    Timestamps must be uniform at ``1 / rate`` to within 1e-6 s.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    yaw: np.ndarray
    v: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    steer: np.ndarray
    rate: float = DEFAULT_RATE

    def __post_init__(self) -> None:
        n = None
        for name in LOG_COLUMNS:
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise ValueError(f"column {name} has {len(arr)} rows, expected {n}")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        if n and n > 1:
            err = np.max(np.abs(np.diff(self.t) - 1.0 / self.rate))
            if err > _UNIFORM_TOL:
                raise ValueError(f"timestamps are not uniform at {self.rate:g} Hz (max error {err:.3g} s)")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0

    def shifted(self, dt: float) -> "TrajectoryLog":
        """Copy with every timestamp offset by ``dt``."""
        cols = {name: getattr(self, name) for name in LOG_COLUMNS}
        cols["t"] = cols["t"] + dt
        return TrajectoryLog(**cols, rate=self.rate)

    def to_csv(self, dest: str | Path) -> None:
        with open(dest, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(LOG_COLUMNS)
            cols = [getattr(self, name) for name in LOG_COLUMNS]
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, src: str | Path, rate: float | None = None) -> "TrajectoryLog":
        """Read a log; the rate is inferred from the timestamps unless given."""
        with open(src, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(LOG_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"log is missing columns {sorted(missing)}")
            rows = [[float(r[c]) for c in LOG_COLUMNS] for r in reader]
        data = np.asarray(rows, dtype=float).reshape(-1, len(LOG_COLUMNS))
        if rate is None:
            rate = 1.0 / float(np.median(np.diff(data[:, 0]))) if len(data) > 1 else DEFAULT_RATE
        return cls(*data.T, rate=rate)


@dataclass(frozen=True)
class ComplianceReport:
    accel_compliance_fraction: float
    jerk_compliance_fraction: float
    max_ax: float
    min_ax: float
    max_abs_ay: float
    max_abs_jx: float
    max_abs_jy: float
    lap_time: float
    max_lateral_error: float
    style: DrivingStyle

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            val = getattr(self, f.name)
            lines.append(f"{f.name}={val.name if isinstance(val, DrivingStyle) else repr(float(val))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ComplianceReport":
        kv = dict(line.split("=", 1) for line in text.splitlines() if "=" in line)
        kwargs = {}
        for f in fields(cls):
            raw = kv[f.name]
            kwargs[f.name] = DrivingStyle[raw] if f.name == "style" else float(raw)
        return cls(**kwargs)


def _odd_window(window: float, dt: float) -> int:
    n = window / dt
    return max(1, 2 * int(round((n - 1.0) / 2.0)) + 1)


def estimate_jerk(t, a, window: float = DEFAULT_JERK_WINDOW) -> np.ndarray:
    """Jerk from a sampled acceleration signal.

    The signal is smoothed with a centred moving average spanning
    ``window`` seconds (rounded to an odd sample count), differentiated
    with central differences (one-sided at the ends), and the derivative
    is smoothed again with the same average. ``window=0`` gives the raw
    finite difference, exact for polynomials up to degree two.

    Raises:
        InsufficientDataError: fewer than three samples.
    """
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    if len(a) < 3 or len(t) != len(a):
        raise InsufficientDataError(f"need at least 3 samples, got {len(a)}")
    if window < 0:
        raise ValueError("window must be non-negative")
    dt = float(np.median(np.diff(t)))
    n = _odd_window(window, dt) if window > 0 else 1
    if n == 1:
        return np.gradient(a, t)
    smooth = uniform_filter1d(a, n, mode="nearest")
    return uniform_filter1d(np.gradient(smooth, t), n, mode="nearest")


def classify_style(log: TrajectoryLog, jerk_window: float = DEFAULT_JERK_WINDOW) -> DrivingStyle:
    """Calmest preset whose region holds the 95th percentiles of the log.

    Raises:
        InsufficientDataError: less than 2 s of data.
    """
    if len(log) < 3 or log.duration < MIN_CLASSIFY_DURATION - 1e-9:
        raise InsufficientDataError(f"need at least {MIN_CLASSIFY_DURATION:g} s of data")
    jx = estimate_jerk(log.t, log.ax, jerk_window)
    jy = estimate_jerk(log.t, log.ay, jerk_window)
    p = STYLE_PERCENTILE
    acc_pos = np.percentile(np.maximum(log.ax, 0.0), p)
    acc_neg = np.percentile(np.maximum(-log.ax, 0.0), p)
    lat = np.percentile(np.abs(log.ay), p)
    jerk_x = np.percentile(np.abs(jx), p)
    jerk_y = np.percentile(np.abs(jy), p)
    for style in DrivingStyle:
        o = preset(style)
        if (acc_pos <= o.ax_pos and acc_neg <= -o.ax_neg and lat <= o.ay_abs
                and jerk_x <= o.jx_abs and jerk_y <= o.jy_abs):
            return style
    return DrivingStyle.ExtremelyAggressive


@dataclass(frozen=True, eq=False)
class SampleFlags:
    """Per-row estimates and compliance flags, for plotting."""

    t: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    jx: np.ndarray
    jy: np.ndarray
    accel_inside: np.ndarray
    jerk_inside: np.ndarray

    def to_csv(self, dest: str | Path) -> None:
        with open(dest, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "ax", "ay", "jx", "jy", "accel_inside", "jerk_inside"])
            for row in zip(self.t, self.ax, self.ay, self.jx, self.jy, self.accel_inside, self.jerk_inside):
                w.writerow([repr(float(v)) for v in row[:5]] + [int(row[5]), int(row[6])])

    def gg_csv(self, dest: str | Path) -> None:
        """G-G scatter data: ``ax,ay,inside``."""
        with open(dest, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ax", "ay", "inside"])
            for ax, ay, ins in zip(self.ax, self.ay, self.accel_inside):
                w.writerow([repr(float(ax)), repr(float(ay)), int(ins)])


def sample_flags(
    log: TrajectoryLog, opm: OccupantPreferenceMetric, jerk_window: float = DEFAULT_JERK_WINDOW
) -> SampleFlags:
    if len(log) < 3:
        raise InsufficientDataError(f"need at least 3 samples, got {len(log)}")
    jx = estimate_jerk(log.t, log.ax, jerk_window)
    jy = estimate_jerk(log.t, log.ay, jerk_window)
    acc = np.array([contains_acceleration(opm, a, b) for a, b in zip(log.ax, log.ay)], dtype=bool)
    jrk = np.array([contains_jerk(opm, a, b) for a, b in zip(jx, jy)], dtype=bool)
    return SampleFlags(log.t, log.ax, log.ay, jx, jy, acc, jrk)


def max_lateral_error(log: TrajectoryLog, path: PathGeometry) -> float:
    if len(log) == 0:
        raise InsufficientDataError("empty log")
    return max(path.lateral_distance(float(x), float(y)) for x, y in zip(log.x, log.y))


def compliance_report(
    log: TrajectoryLog,
    opm: OccupantPreferenceMetric,
    path: PathGeometry,
    jerk_window: float = DEFAULT_JERK_WINDOW,
) -> ComplianceReport:
    """Audit a log.

    Fractions count rows inside the acceleration box and the jerk box
    separately. The style label needs 2 s of data; shorter logs raise.

    Raises:
        InsufficientDataError: empty or too short a log.
    """
    if len(log) == 0:
        raise InsufficientDataError("empty log")
    flags = sample_flags(log, opm, jerk_window)
    return ComplianceReport(
        accel_compliance_fraction=float(np.mean(flags.accel_inside)),
        jerk_compliance_fraction=float(np.mean(flags.jerk_inside)),
        max_ax=float(np.max(log.ax)),
        min_ax=float(np.min(log.ax)),
        max_abs_ay=float(np.max(np.abs(log.ay))),
        max_abs_jx=float(np.max(np.abs(flags.jx))),
        max_abs_jy=float(np.max(np.abs(flags.jy))),
        lap_time=log.duration,
        max_lateral_error=max_lateral_error(log, path),
        style=classify_style(log, jerk_window),
    )


__all__ = [
    "ComplianceReport",
    "LOG_COLUMNS",
    "SampleFlags",
    "TrajectoryLog",
    "classify_style",
    "compliance_report",
    "estimate_jerk",
    "max_lateral_error",
    "sample_flags",
]
