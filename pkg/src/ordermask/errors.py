"""Exception types raised across the package."""


class OrderMaskError(Exception):
    """Base class for package errors."""


class DomainError(OrderMaskError, ValueError):
    """An argument lies outside the domain of the operation."""


class BudgetError(OrderMaskError, ValueError):
    """An exact computation was requested beyond its enumeration budget."""


class InvalidInputError(OrderMaskError, ValueError):
    """Input data violates a precondition (e.g. a masked clean sequence)."""


class UnsupportedRegimeError(OrderMaskError, ValueError):
    """The operation is only exact for time-independent denoisers."""


class SchemaError(OrderMaskError, ValueError):
    """Table data does not conform to a schema."""
