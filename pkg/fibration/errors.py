"""
Error hierarchy shared by every computation in the package.

Domain/argument failures are ValueErrors, solver failures are RuntimeErrors,
and numerical classification failures are ArithmeticErrors, so callers can
catch either the precise class or the broad builtin.
"""
from __future__ import annotations


class FibrationError(Exception):
    """Base class for all errors raised by the fibration package."""


# ----------------------------
# Domain / argument errors
# ----------------------------
class DomainError(FibrationError, ValueError):
    pass


class SingularReducedSpace(FibrationError, ValueError):
    pass


class OutOfRange(FibrationError, ValueError):
    pass


class ConstraintViolation(FibrationError, ValueError):
    pass


class RelationViolated(FibrationError, ValueError):
    pass


class UnknownInvariant(FibrationError, ValueError):
    pass


class NotUnimodular(FibrationError, ValueError):
    pass


class NotReducible(FibrationError, ValueError):
    pass


# ----------------------------
# Solver errors
# ----------------------------
class StepLimitExceeded(FibrationError, RuntimeError):
    pass


class NoConvergence(FibrationError, RuntimeError):
    pass


class DegenerateBasis(FibrationError, RuntimeError):
    pass


class StepCollapse(FibrationError, RuntimeError):
    pass


class NearDiscriminant(FibrationError, RuntimeError):
    pass


# ----------------------------
# Classification errors
# ----------------------------
class DegenerateLinearization(FibrationError, ArithmeticError):
    pass


class RoundingAmbiguous(FibrationError, ArithmeticError):
    pass
