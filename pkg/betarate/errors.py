"""
Exceptions and warnings raised across the package, and the argument checks
that raise them.
"""

import math
import numbers


class BetarateError(Exception):
    "Root of every error raised by betarate."
    pass


class DomainError(BetarateError, ValueError):
    "Exception raised when an argument lies outside a function's domain."
    pass


class UnsupportedDomainError(DomainError):
    "Exception raised when an optional backend cannot evaluate the arguments."
    pass


class SizeError(DomainError):
    "Exception raised when inputs would make a closed form take unbounded time."
    pass


class NumericError(BetarateError, ArithmeticError):
    "Exception raised for degenerate numerical coefficients."
    pass


class StateError(BetarateError, RuntimeError):
    "Exception raised when mutating a stopped sequential test."
    pass


class InfeasibleDesignError(BetarateError):
    "Exception raised when no sequential design exists below the search cap."
    pass


class GenerationError(BetarateError):
    "Exception raised when benchmark parameter generation exceeds its retry cap."
    pass


class CancellationWarning(RuntimeWarning):
    "Warning issued when an alternating sum loses too many significant digits."
    pass


def require_int(name: str, v: object, minimum: int) -> int:
    "Validate an integer argument with a lower bound; bools are rejected."
    if isinstance(v, bool) or not isinstance(v, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {v!r}.")
    if v < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {v}.")
    return int(v)


def require_positive(name: str, v: float) -> float:
    "Validate a positive finite real."
    v = float(v)
    if not (v > 0.0) or math.isinf(v):
        raise DomainError(f"{name} must be a positive finite real, got {v}.")
    return v


def require_open_unit(name: str, v: float) -> float:
    "Validate a real in the open interval (0, 1)."
    v = float(v)
    if not 0.0 < v < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {v}.")
    return v
