"""Exception types shared across the library."""


class NestlabError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(NestlabError):
    """Operands have incompatible shapes."""


class NotHermitian(NestlabError):
    """A hermitian matrix was required."""


class NotPositiveDefinite(NestlabError):
    """A positive definite matrix was required."""


class NotProjection(NestlabError):
    """An orthogonal projection was required."""


class NotInAmbient(NestlabError):
    """A matrix lies outside the span of the ambient algebra."""


class NotStarClosed(NestlabError):
    """A *-closed algebra was required."""


class NotVonNeumann(NestlabError):
    """An algebra equal to its double commutant was required."""


class NotInvariant(NestlabError):
    """A projection failed the invariance check for an algebra."""


class WrongClassification(NestlabError):
    """A lattice with a different classification was required."""


class LatticeNotEnumerable(NestlabError):
    """The invariant-projection lattice is not a finite enumerable CSL.

    Raised by operations that need the full element list when compute_lat
    returned NON_CSL (with a witness) or NON_CSL_SUSPECTED.
    """

    def __init__(self, classification, witness=None):
        super().__init__(f"lattice classification is {classification}")
        self.classification = classification
        self.witness = witness


class ClosureOverflow(NestlabError):
    """Internal error: an algebraic closure exceeded its hard cap."""


class PreconditionError(NestlabError):
    """Mode- or task-specific preconditions were violated."""
