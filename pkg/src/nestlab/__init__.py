"""nestlab: invariant-projection lattices, nest-relative Cholesky
factorization, and two-projection geometry for subalgebras of
finite-dimensional von Neumann algebras."""

from .numerics import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_cmatrix,
    cholesky_upper,
    hermitian_eig,
    range_projection,
)
from .algebra import (
    AmbientAlgebra,
    MatrixAlgebra,
    ambient_algebra,
    central_decomposition,
    close_algebra,
    commutant,
    compress,
    conjugate,
    contains,
    span_equal,
)
from .lattice import (
    CSL_NOT_NEST,
    NEST,
    NON_CSL,
    NON_CSL_SUSPECTED,
    Projection,
    ProjectionLattice,
    as_projection,
    atoms,
    compute_lat,
    invariant_check,
    join,
    lattice_compress,
    meet,
)
from .reflexivity import (
    NOT_APPLICABLE,
    NOT_REFLEXIVE,
    REFLEXIVE,
    ReflexivityReport,
    alg_of,
    is_reflexive,
    masa_check,
    reflexive_hull,
)
from .twoproj import HalmosDecomposition, commutes_iff_no_generic, halmos_decompose
from .factorization import (
    FACTORED,
    GAP,
    FactorizationReport,
    FactorizationVerdict,
    Nest,
    alg_membership_residual,
    has_factorization_fd,
    logmodularity_gap,
    nest_cholesky,
    triangularize,
    witness_generator,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TOL",
    "ToleranceConfig",
    "as_cmatrix",
    "cholesky_upper",
    "hermitian_eig",
    "range_projection",
    "AmbientAlgebra",
    "MatrixAlgebra",
    "ambient_algebra",
    "central_decomposition",
    "close_algebra",
    "commutant",
    "compress",
    "conjugate",
    "contains",
    "span_equal",
    "CSL_NOT_NEST",
    "NEST",
    "NON_CSL",
    "NON_CSL_SUSPECTED",
    "Projection",
    "ProjectionLattice",
    "as_projection",
    "atoms",
    "compute_lat",
    "invariant_check",
    "join",
    "lattice_compress",
    "meet",
    "NOT_APPLICABLE",
    "NOT_REFLEXIVE",
    "REFLEXIVE",
    "ReflexivityReport",
    "alg_of",
    "is_reflexive",
    "masa_check",
    "reflexive_hull",
    "HalmosDecomposition",
    "commutes_iff_no_generic",
    "halmos_decompose",
    "FACTORED",
    "GAP",
    "FactorizationReport",
    "FactorizationVerdict",
    "Nest",
    "alg_membership_residual",
    "has_factorization_fd",
    "logmodularity_gap",
    "nest_cholesky",
    "triangularize",
    "witness_generator",
    "errors",
]
