"""Exception types shared across the package.

Every error that a caller may want to branch on has its own class; the CLI
maps these onto exit codes (see ccx.cli).
"""


class CCXError(Exception):
    """Base class for all package errors."""


class ParseError(CCXError):
    """A problem file or report could not be parsed or fails schema checks."""


class NonHermitianError(CCXError):
    """A matrix required to be Hermitian violates the hermiticity tolerance."""


class NotPSDError(CCXError):
    """A matrix required to be positive semidefinite has a negative eigenvalue."""


class SingularError(CCXError):
    """A matrix required to be invertible is singular at the rank cutoff."""


class BadIndexError(CCXError):
    """A group-element index is out of range."""


class DimensionMismatchError(CCXError):
    """Operands live on incompatible spaces."""


class InvalidActionError(CCXError):
    """A group action fails the automorphism or homomorphism axioms."""


class NotNormalizedError(CCXError):
    """Coefficients of an operator-convex combination do not sum to the identity."""


class NotCPError(CCXError):
    """A map required to be completely positive is not."""


class NotUnitalError(CCXError):
    """A map required to be unital is not."""


class NotSameMapError(CCXError):
    """Two dilations do not compress to the same map."""


class NotMinimalError(CCXError):
    """A dilation required to be minimal is not."""


class NotInvariantError(CCXError):
    """A map required to be invariant under the group action is not."""


class NotInCommutantError(CCXError):
    """An operator does not commute with the dilation generators."""


class OutOfIntervalError(CCXError):
    """An operator violates 0 <= T <= I at the PSD tolerance."""


class NotDominatedError(CCXError):
    """A map is not dominated by the reference map in the CP order."""


class ResidualTooLargeError(CCXError):
    """A certified linear solve left a residual above the tolerance."""


class SingularCompressionError(CCXError):
    """The compression of an operator to the domain space is not invertible."""


class UncertifiedInputError(CCXError):
    """An input map lacks the required extremality certificate."""
