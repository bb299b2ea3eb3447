"""
Error hierarchy shared by the lab apps.

Parameter mistakes raise ``ValueError`` at the call site; config files raise
``django.core.exceptions.ValidationError``. The classes below cover failures
that only show up while computing.
"""


class LabError(Exception):
    """Base class for lab computation failures."""


class NumericalGuardError(LabError, ArithmeticError):
    """A numerical guard tripped; the result cannot be trusted."""


class SpillError(NumericalGuardError):
    """Off-grid mass is too large relative to the queried probability."""

    def __init__(self, message, ambiguous=0.0, value=0.0):
        super().__init__(message)
        self.ambiguous = ambiguous
        self.value = value


class GridOverflowError(NumericalGuardError):
    """A lattice law would need more cells than MAX_CELLS allows."""


class QuadratureError(NumericalGuardError):
    """Adaptive quadrature missed its tolerance."""

    def __init__(self, message, abserr=None):
        super().__init__(message)
        self.abserr = abserr


class ConvergenceError(NumericalGuardError):
    """Root finder or fixed-point iteration did not converge."""


class UnboundedBoundaryError(LabError):
    """A defect never drops below its tolerance on the search range."""
