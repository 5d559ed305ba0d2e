"""Exception types raised across the package."""


class InvalidInput(ValueError):
    """Malformed, non-finite or dimensionally inconsistent input."""


class NotPSD(ValueError):
    """A matrix expected to be positive semi-definite has a clearly negative eigenvalue."""


class UnknownPoint(KeyError):
    """A point is absent from a table keyed by grid coordinates."""
