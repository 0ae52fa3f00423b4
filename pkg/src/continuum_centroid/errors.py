"""Exception types raised across the package."""


class CCCError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CCCError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(CCCError, ValueError):
    """Evaluation point outside the curve domain."""


class DataFormatError(CCCError, ValueError):
    """Malformed input file or incompatible data layout."""


class DegenerateDesignError(CCCError):
    """The centered design carries no usable signal (e.g. a single label)."""


class DeflationExhaustedError(CCCError):
    """No further component can be extracted after deflation."""


class InsufficientGroupError(CCCError):
    """A group has too few members for variance estimation."""


class DegenerateVarianceError(CCCError):
    """A projected variance needed by a discriminant is zero."""


class TuningError(CCCError):
    """Every tuning candidate failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
