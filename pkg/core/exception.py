from typing import Optional, TYPE_CHECKING

if TYPE_CHECKING:
    from .measure import Interval


class DiffusionException(Exception):
    """
    Base exception for all other custom exceptions.
    """
    pass


class ConfigException(DiffusionException):
    """
    Raised when an error occurs in the configuration file.
    """
    pass


class IntervalException(DiffusionException):
    """
    Raised when an interval would violate its invariants (lo > hi, included infinite endpoint, ...).
    """
    pass


class MeasureException(DiffusionException):
    """
    Raised when a measure component is malformed or not a Radon measure on the requested interval.
    """
    pass


class NonIntegrableException(MeasureException):
    """
    Raised when an integral diverges without a determined sign (+inf - inf).
    """
    pass


class ScaleException(DiffusionException):
    """
    Raised when a scale function is not strictly increasing and continuous on its interval.
    """
    pass


class OutOfRangeException(ScaleException):
    """
    Raised when inverting a scale function at a value outside of its range.
    """
    pass


class SupportGapException(ScaleException):
    """
    Raised when restricting a scale function would make it constant on some open subinterval.
    """
    def __init__(self, gap: "Interval"):
        self.gap = gap
        super(SupportGapException, self).__init__(
            f"Restricted scale measure has no mass on the open gap {gap}"
        )


class FormFunctionException(DiffusionException):
    """
    Raised when a form function does not fit the scale it is evaluated against.
    """
    pass


class MismatchedBase(DiffusionException):
    """
    Raised when two diffusion specs are compared but their intervals or speed measures differ.
    """
    pass


class UnsupportedOperation(DiffusionException):
    """
    Raised when an operation would need to leave the supported component algebra.
    """
    pass


class PreconditionViolated(DiffusionException):
    """
    Raised when an operation is called outside of its precondition (e.g. limit sequence of a conservative endpoint).
    """
    pass


class ChainException(DiffusionException):
    """
    Raised when a generator matrix is malformed or a grid is degenerate.
    """
    pass


class EmptyCone(ChainException):
    """
    Raised when only the zero measure satisfies detailed balance.
    """
    pass


class InfeasibleConfig(DiffusionException):
    """
    Raised when a simulation config can not be realized on the requested window.
    """
    pass


class SpecFileException(DiffusionException):
    """
    Raised when a JSON document violates the spec file schema. Carries a JSON pointer to the offending value.
    """
    def __init__(self, pointer: str, message: str, cause: Optional[Exception] = None):
        self.pointer = pointer or "/"
        self.cause = cause
        super(SpecFileException, self).__init__(f"{self.pointer}: {message}")
