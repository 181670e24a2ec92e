"""Exception types shared across the package."""


class ObsBanditError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(ObsBanditError, ValueError):
    """A matrix that must be positive (semi)definite is not."""


# Model- and policy-level name for the same failure.
NotPSD = NotPositiveDefinite


class NonConvergence(ObsBanditError, ArithmeticError):
    pass


class DimensionMismatch(ObsBanditError, ValueError):
    pass


BadDimension = DimensionMismatch


class NonPositiveNoise(ObsBanditError, ValueError):
    pass


class IndexOutOfRange(ObsBanditError, IndexError):
    pass


class BadDelta(ObsBanditError, ValueError):
    """Failure probability outside (0, 0.25)."""


class ZeroDirection(ObsBanditError, ValueError):
    pass


class ZeroSignal(ObsBanditError, ValueError):
    pass


class InsufficientReplicates(ObsBanditError, ValueError):
    pass


class TooShort(ObsBanditError, ValueError):
    pass


class ConfigError(ObsBanditError, ValueError):
    """Invalid or unreadable configuration (CLI exit code 2)."""


class SchemaError(ObsBanditError, ValueError):
    """A CSV file does not follow the expected column layout."""


class BadRange(ObsBanditError, ValueError):
    pass
