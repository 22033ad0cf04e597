"""Exception hierarchy shared by all modules."""


class FairshareError(Exception):
    """Base class for errors raised by this package."""


class DomainError(FairshareError, ValueError):
    """A bundle or point lies outside the valuation's good universe."""


class ParseError(FairshareError, ValueError):
    """An instance or allocation document violates its schema.

    ``path`` locates the offending field, e.g. ``valuations[1].values[0]``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class AllocationError(FairshareError, ValueError):
    """An allocation overlaps itself or exceeds a type's copy count."""


class CapabilityError(FairshareError):
    """The requested exact oracle would exceed its configured size limit."""

    def __init__(self, message: str, limit: int | None = None):
        self.limit = limit
        super().__init__(message)


class InvariantError(FairshareError, AssertionError):
    """An internal guarantee did not hold; this always indicates a bug."""
