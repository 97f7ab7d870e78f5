"""Reflexive hulls and the masa-based nest-algebra criterion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import (
    AmbientAlgebra,
    MatrixAlgebra,
    algebra_from_basis,
    central_decomposition,
    compress,
    contains,
    _span_intersection,
)
from .errors import LatticeNotEnumerable, NotInAmbient
from .lattice import (
    NON_CSL,
    NON_CSL_SUSPECTED,
    ProjectionLattice,
    as_projection,
    compute_lat,
)
from .numerics import fro

__all__ = [
    "alg_of",
    "reflexive_hull",
    "is_reflexive",
    "masa_check",
    "ReflexivityReport",
    "REFLEXIVE",
    "NOT_REFLEXIVE",
    "NOT_APPLICABLE",
]

REFLEXIVE = "REFLEXIVE"
NOT_REFLEXIVE = "NOT_REFLEXIVE"
NOT_APPLICABLE = "NOT_APPLICABLE"


def alg_of(projections, ambient: AmbientAlgebra) -> MatrixAlgebra:
    """All ambient elements leaving the range of every projection invariant.

    Solves the linear system {x in span(ambient) : p_perp x p = 0 for all p}
    on ambient coordinates.  The result is verified to be a unital algebra.
    """
    tol = ambient.tol
    n = ambient.dim
    ps = []
    for p in projections:
        proj = as_projection(p, tol)
        ambient.require_member(proj.matrix, "lattice projection")
        ps.append(proj)
    k = ambient.basis.shape[0]
    if not ps:
        return algebra_from_basis(ambient.flat.copy(), ambient, verify=False)
    eye = np.eye(n, dtype=np.complex128)
    rows = []
    for p in ps:
        pperp = eye - p.matrix
        moved = np.einsum("ij,kjl,lm->kim", pperp, ambient.basis, p.matrix, optimize=True)
        rows.append(moved.reshape(k, -1).T)  # (n^2, k): columns indexed by coefficients
    stacked = np.vstack(rows)
    _, s, vh = np.linalg.svd(stacked, full_matrices=True)
    cutoff = tol.rank_cutoff(s[0], max(stacked.shape)) if s.size else 0.0
    rank = int(np.count_nonzero(s > cutoff))
    coeffs = vh[rank:].conj()  # orthonormal rows in coefficient space
    flat = coeffs @ ambient.flat
    return algebra_from_basis(flat, ambient, verify=True)


def reflexive_hull(algebra: MatrixAlgebra, seed: int = 0, budget: int = 64) -> MatrixAlgebra:
    """Alg of the computed invariant-projection lattice; contains the input."""
    lat = compute_lat(algebra, seed=seed, budget=budget)
    return hull_of_lattice(algebra, lat)


def hull_of_lattice(algebra: MatrixAlgebra, lat: ProjectionLattice) -> MatrixAlgebra:
    if lat.classification in (NON_CSL, NON_CSL_SUSPECTED):
        raise LatticeNotEnumerable(lat.classification, lat.witness)
    hull = alg_of(lat.elements, algebra.ambient)
    for a in algebra.basis:
        _, res = contains(hull, a)
        if res > algebra.tol.eq_tol * max(1.0, fro(a)):
            raise NotInAmbient(f"hull does not contain the algebra (residual {res:.3e})")
    return hull


@dataclass
class ReflexivityReport:
    status: str
    extra_dim: int | None
    hull: MatrixAlgebra | None
    lattice: ProjectionLattice

    @property
    def reflexive(self) -> bool:
        return self.status == REFLEXIVE


def is_reflexive(algebra: MatrixAlgebra, seed: int = 0, budget: int = 64) -> ReflexivityReport:
    """Whether the algebra equals Alg of its own invariant lattice.

    For NON_CSL lattices the enumeration strategy cannot certify the hull,
    so the verdict is NOT_APPLICABLE rather than a guess.
    """
    lat = compute_lat(algebra, seed=seed, budget=budget)
    if lat.classification in (NON_CSL, NON_CSL_SUSPECTED):
        return ReflexivityReport(status=NOT_APPLICABLE, extra_dim=None, hull=None, lattice=lat)
    hull = hull_of_lattice(algebra, lat)
    extra = hull.dim - algebra.dim
    status = REFLEXIVE if extra == 0 else NOT_REFLEXIVE
    return ReflexivityReport(status=status, extra_dim=extra, hull=hull, lattice=lat)


def selfadjoint_part(algebra: MatrixAlgebra) -> MatrixAlgebra:
    """The diagonal D = A intersect A*, as an algebra over the same ambient."""
    adj = algebra.adjoint_algebra()
    flat = _span_intersection(algebra.flat, adj.flat, algebra.tol)
    return algebra_from_basis(flat, algebra.ambient, verify=True)


def masa_check(algebra: MatrixAlgebra, seed: int = 0):
    """Whether the algebra contains a masa of the ambient.

    Works structurally on D = A intersect A*: D is a finite-dimensional von
    Neumann algebra, and it contains a masa exactly when every minimal
    central summand acts with multiplicity one (corner dimension equals the
    squared rank of the central projection).  Returns (flag, masa_basis)
    where masa_basis is a family of rank-one projections summing to the
    identity, all members of the algebra.
    """
    n = algebra.n
    tol = algebra.tol
    diag = selfadjoint_part(algebra)
    if diag.dim < n:
        return False, None
    blocks, u = central_decomposition(diag, seed=seed)
    offsets = np.cumsum([0] + blocks)
    masa = []
    for i, r in enumerate(blocks):
        cols = u[:, offsets[i]: offsets[i + 1]]
        z = cols @ cols.conj().T
        corner = compress(diag, z, np.zeros((n, n), dtype=np.complex128))
        if corner.dim != r * r:
            return False, None
        masa.extend(cols[:, j: j + 1] @ cols[:, j: j + 1].conj().T for j in range(r))
    for m in masa:
        member, res = contains(algebra, m)
        if not member:
            return False, None
    return True, masa
