"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid/run configuration or mismatched field shapes."""


class DomainError(ValueError):
    """Argument outside the mathematically admissible range."""


class SingularResolventError(ArithmeticError):
    """Resolvent solve requested at a point inside the spectrum."""


class NanAbort(FloatingPointError):
    """Time integration produced non-finite values."""
