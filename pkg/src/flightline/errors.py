"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FlightlineError(Exception):
    """Base class for every error raised by this package."""


class ModelDomainError(FlightlineError):
    """A dynamics input (state, control, or parameter) is outside the model domain."""


class StallFloorError(ModelDomainError):
    """Airspeed fell below the validity floor of the aerodynamic model."""


class DivergenceError(FlightlineError):
    """Numerical integration produced non-finite values."""


class TrimInfeasibleError(FlightlineError):
    """The trim solver could not converge, or the target point is outside the
    documented feasibility window. ``bound`` names the violated constraint."""

    def __init__(self, message: str, bound: str):
        super().__init__(message)
        self.bound = bound


class TeamValidationError(FlightlineError):
    """A team configuration violates one of its invariants.

    ``violation`` is a stable machine-readable name for the first violation
    found (e.g. ``duplicate_callsign``).
    """

    def __init__(self, message: str, violation: str):
        super().__init__(message)
        self.violation = violation


class TaskDefinitionError(FlightlineError):
    """A task produced an illegal value (e.g. a non-finite reward)."""


class RecordingError(FlightlineError):
    """A trajectory file is malformed, out of order, or inconsistent."""


class ProtocolError(FlightlineError):
    """A wire-protocol invariant was violated. ``code`` is machine-readable."""

    def __init__(self, message: str, code: str = "protocol"):
        super().__init__(message)
        self.code = code


class AdmissionDenied(FlightlineError):
    """The state server refused a team's join request."""

    def __init__(self, message: str, code: str):
        super().__init__(message)
        self.code = code


class EnvUsageError(FlightlineError):
    """Misuse of the environment step/reset contract."""
