"""Exception types raised across the package."""


class MollowCavityError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(MollowCavityError, ValueError):
    pass


class InvalidParameterError(MollowCavityError, ValueError):
    pass


class DomainError(MollowCavityError, ValueError):
    pass


class NoUniqueSteadyStateError(MollowCavityError, RuntimeError):
    pass


class ConvergenceError(MollowCavityError, RuntimeError):
    pass


class WindowTooShortError(MollowCavityError, ValueError):
    """Correlation did not decay inside the requested delay window."""


class PeakDetectionError(MollowCavityError, ValueError):
    pass


class FitError(MollowCavityError, RuntimeError):
    pass


class SweepError(MollowCavityError, RuntimeError):
    pass


class ConfigError(MollowCavityError, ValueError):
    """Bad run configuration.

    Attributes:
        key: dotted key path of the offending entry, if known.
        line: 1-based line number in the config file, if known.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
