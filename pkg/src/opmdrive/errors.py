"""Exception hierarchy shared by every opmdrive module."""


class OPMDriveError(Exception):
    """Base class for all package errors."""


class InvalidMetricError(OPMDriveError, ValueError):
    """Preference metric is malformed or describes an empty region."""


class GeometryError(OPMDriveError, ValueError):
    """Route geometry cannot be built from the given waypoints."""


class InsufficientPointsError(GeometryError):
    pass


class DegenerateGeometryError(GeometryError):
    pass


class OutOfRangeError(OPMDriveError, ValueError):
    """A station or arc length lies outside an open path or profile."""


class InfeasibleError(OPMDriveError):
    """No profile satisfies the boundary conditions and comfort bounds.

    ``station`` is the index of the binding station when one is known.
    """

    def __init__(self, message: str, station: int | None = None):
        super().__init__(message)
        self.station = station


class StalledProfileError(OPMDriveError, ValueError):
    """A profile segment has zero speed at both ends (infinite time)."""


class InvalidRequestError(OPMDriveError, ValueError):
    """Lane-change request is malformed."""


class PreconditionError(OPMDriveError):
    """An operation was called outside its precondition."""


class OffPathError(OPMDriveError):
    """The vehicle is too far from the reference path to project onto it."""


class InsufficientDataError(OPMDriveError, ValueError):
    """A log or signal is too short for the requested analysis."""


class ConfigError(OPMDriveError, ValueError):
    """Scenario or parameter file is malformed."""
