"""Exception types raised by varharm."""


class VarharmError(Exception):
    """Base class for all package errors."""


class DomainError(VarharmError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class EmptySupportError(VarharmError, ValueError):
    """A ball or region does not meet any grid point."""


class InvariantError(VarharmError, ValueError):
    """A structural invariant of a domain type is violated."""


class IllConditionedError(VarharmError, ArithmeticError):
    pass


class DegenerateSeedError(VarharmError, ArithmeticError):
    pass


class GeometryError(VarharmError, ValueError):
    """Requested sample points fall outside the usable region."""
