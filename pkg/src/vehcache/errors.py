"""Exception types shared across the package."""


class VehCacheError(Exception):
    """Base class for all package errors."""


class DomainError(VehCacheError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class StabilityViolation(DomainError):
    """Interaction rates violate the stability region of the closed forms."""


class TruncationInsufficient(VehCacheError):
    """The truncated chain leaves too much probability mass at its boundary."""


class SingularSystem(VehCacheError):
    """A linear solve for a stationary distribution failed."""


class DimensionMismatch(VehCacheError, ValueError):
    """Vector arguments have incompatible lengths."""


class OutOfRange(VehCacheError):
    """A vehicle is outside the unit-disk range of the user it should serve."""


class InfeasibleCapacity(VehCacheError):
    """The cache capacity admits no caching at all."""


class NonConvergence(VehCacheError):
    """An iterative method hit its iteration cap."""


class MissingState(VehCacheError):
    """A slot snapshot lacks a component required to build the slot problem."""


class ParseError(VehCacheError):
    """A configuration file could not be parsed or names an unknown field."""


class ValidationError(VehCacheError):
    """A configuration parsed but violates an invariant."""
