"""Exception taxonomy shared across the package."""


class FoveaKitError(Exception):
    """Base class for all library errors."""


class InvalidParamsError(FoveaKitError, ValueError):
    """Transform parameters violate their invariants."""


class ShapeError(FoveaKitError, ValueError):
    """An array argument has the wrong shape or dtype."""


class ConvergenceError(FoveaKitError, RuntimeError):
    """An iterative solve failed to reach the requested tolerance."""

    def __init__(self, message: str, indices: tuple[int, ...] = ()):
        super().__init__(message)
        self.indices = indices


class SchemaError(FoveaKitError, ValueError):
    """An input file does not match the expected schema."""


class UnknownClassError(FoveaKitError, KeyError):
    """A category name has no entry in the class-height table."""


class EmptyInputError(FoveaKitError, ValueError):
    """An operation that needs at least one element received none."""
