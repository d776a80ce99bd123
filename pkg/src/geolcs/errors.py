"""Exception hierarchy shared by every geolcs module."""


class GeolcsError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GeolcsError):
    """A chart point lies outside a non-periodic chart."""


class DomainExitError(DomainError):
    """A trajectory left a non-periodic chart during integration.

    Attributes
    ----------
    exit_time : float
        Integration time at which the exit was detected.
    """

    def __init__(self, message, exit_time=None):
        super().__init__(message)
        self.exit_time = exit_time


class SingularityError(GeolcsError):
    """Evaluation at a point where the object is not defined (e.g. a
    direction-dependent metric at the zero vector)."""


class DimensionError(GeolcsError):
    """Operation not supported for the given chart dimension."""


class MetricError(GeolcsError):
    """A matrix that must be symmetric positive definite is not."""


class BudgetError(GeolcsError):
    """Integration step budget exhausted before reaching the target time."""


class NumericsError(GeolcsError):
    """A numerical routine failed to converge or produced non-finite values."""


class EmptyFieldError(GeolcsError):
    """A field sweep produced no valid node."""


class EmptyInputError(GeolcsError):
    """An operation that needs a non-empty input received an empty one."""


class ConfigError(GeolcsError):
    """Invalid analysis configuration.

    Attributes
    ----------
    line : int or None
        1-based line number in the config text, when known.
    key : str or None
        Offending key, when known.
    """

    def __init__(self, message, line=None, key=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if key is not None:
            loc.append(f"key '{key}'")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.line = line
        self.key = key
