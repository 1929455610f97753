"""Exception hierarchy shared across the package."""


class CovertNetError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CovertNetError, ValueError):
    """Parameters outside their admissible domain."""


class DegenerateInstanceError(CovertNetError, ValueError):
    """An instance too small for the requested operation."""


class ScheduleError(CovertNetError, ValueError):
    """Infeasible transmission schedule."""


class CovertnessViolation(CovertNetError, RuntimeError):
    """A warden's KL bound exceeded the budget."""


class BoundViolation(CovertNetError, RuntimeError):
    """A scheme's throughput exceeded the cutset upper bound."""


class InsufficientDataError(CovertNetError, ValueError):
    """Too few usable points for a regression."""
