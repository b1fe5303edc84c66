"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`PeriodicHawkesError`
so callers (and the CLI) can map failures to a small set of categories.
"""


class PeriodicHawkesError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PeriodicHawkesError, ValueError):
    """Invalid user-supplied data, parameters, or configuration."""


class EstimationError(PeriodicHawkesError):
    """Model fitting failed (impossible data, divergence, improper posterior)."""


class SimulationError(PeriodicHawkesError):
    """Sampling refused or failed (for example a nonstationary model)."""


class BoundViolationError(SimulationError):
    """The thinning upper bound was exceeded; indicates an internal bug."""


class NumericError(PeriodicHawkesError):
    """An iterative numeric routine failed to converge.

    Carries the best available partial estimate in ``estimate``.
    """

    def __init__(self, message: str, estimate: float | None = None):
        super().__init__(message)
        self.estimate = estimate


class FitFileError(PeriodicHawkesError):
    """A persisted fit file is unreadable, corrupt, or of an unknown version."""


#: Machine-parseable category names used by the CLI's one-line error output.
ERROR_CATEGORIES: list[tuple[type, str]] = [
    (InputError, "input"),
    (EstimationError, "estimation"),
    (BoundViolationError, "internal"),
    (SimulationError, "simulation"),
    (NumericError, "numeric"),
    (FitFileError, "io"),
]


def error_category(exc: BaseException) -> str:
    for klass, name in ERROR_CATEGORIES:
        if isinstance(exc, klass):
            return name
    return "internal"
