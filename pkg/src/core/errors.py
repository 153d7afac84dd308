"""
Exception hierarchy for the SOS certification stack.

Everything derives from ValueError so callers that only care about
"bad input" can keep catching ValueError.
"""

from typing import Optional


class GramSosError(ValueError):
    """Base class for all library errors"""


class PolynomialSyntaxError(GramSosError):
    """Polynomial text could not be parsed"""

    def __init__(self, message: str, position: int, text: Optional[str] = None):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class DimensionError(GramSosError):
    """Operands have incompatible shapes or variable counts"""


class DegreeError(GramSosError):
    """Polynomial degree is unusable for a Gram representation (odd degree)"""


class BasisError(GramSosError):
    """A monomial cannot be produced from the monomial basis"""

    def __init__(self, message: str, monomial=None):
        self.monomial = monomial
        super().__init__(message)


class SpectralError(GramSosError):
    """Eigen decomposition input is invalid (non-finite, bad count)"""


class InfeasibleSystemError(GramSosError):
    """The affine system A(W) = b has no solution"""


class ConstraintFormatError(GramSosError):
    """A constraint-system or certificate file is malformed"""


class ExperimentSpecError(GramSosError):
    """A benchmark experiment description is invalid"""
