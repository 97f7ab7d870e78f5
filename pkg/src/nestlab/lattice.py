"""Invariant-projection lattices and their classification.

``compute_lat`` enumerates the lattice of projections in the ambient whose
ranges are invariant under an algebra, classifying it as a nest, a
commutative subspace lattice, or neither (with a verified witness pair).
No closed-form algorithm exists for this; the strategy is sampling of
cyclic invariant subspaces plus join/meet closure, with eigenvector seeds
of generic algebra elements doing the heavy lifting for hidden nests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import MatrixAlgebra, _invariance_defect
from .errors import DimensionMismatch, NotProjection, WrongClassification
from .numerics import (
    DEFAULT_TOL,
    ToleranceConfig,
    as_cmatrix,
    fro,
    null_space,
    orthonormal_range,
    range_projection,
)

__all__ = [
    "NEST",
    "CSL_NOT_NEST",
    "NON_CSL",
    "NON_CSL_SUSPECTED",
    "Projection",
    "ProjectionLattice",
    "as_projection",
    "invariant_check",
    "join",
    "meet",
    "compute_lat",
    "atoms",
    "lattice_compress",
]

NEST = "NEST"
CSL_NOT_NEST = "CSL_NOT_NEST"
NON_CSL = "NON_CSL"
NON_CSL_SUSPECTED = "NON_CSL_SUSPECTED"


@dataclass
class Projection:
    """An orthogonal projection with its (integer) rank."""

    matrix: np.ndarray
    rank: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def complement(self) -> "Projection":
        eye = np.eye(self.dim, dtype=np.complex128)
        return Projection(matrix=eye - self.matrix, rank=self.dim - self.rank)

    def leq(self, other: "Projection", tol: ToleranceConfig = DEFAULT_TOL) -> bool:
        """p <= q  iff  pq = p within eq_tol."""
        return fro(self.matrix @ other.matrix - self.matrix) <= tol.eq_tol * max(
            1.0, fro(self.matrix)
        )

    def close_to(self, other: "Projection", tol: ToleranceConfig = DEFAULT_TOL) -> bool:
        return fro(self.matrix - other.matrix) <= tol.eq_tol * max(
            1.0, fro(self.matrix), fro(other.matrix)
        )


def as_projection(x, tol: ToleranceConfig = DEFAULT_TOL) -> Projection:
    """Validate and wrap a matrix as a Projection."""
    if isinstance(x, Projection):
        return x
    m = as_cmatrix(x)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"projection must be square, got {m.shape}")
    scale = max(1.0, fro(m))
    if fro(m - m.conj().T) > tol.eq_tol * scale or fro(m @ m - m) > tol.eq_tol * scale:
        raise NotProjection("matrix is not hermitian idempotent at eq_tol")
    tr = float(np.trace(m).real)
    rank = int(np.round(tr))
    if abs(tr - rank) > tol.eq_tol * max(1.0, abs(tr)):
        raise NotProjection(f"trace {tr} is not near an integer")
    return Projection(matrix=m, rank=rank)


@dataclass
class ProjectionLattice:
    """Finite set of invariant projections with classification metadata.

    witness is present iff classification is NON_CSL; complete marks that
    join/meet closure reached a fixed point.
    """

    elements: list
    classification: str
    witness: tuple | None = None
    complete: bool = True

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    def index_of(self, p, tol: ToleranceConfig = DEFAULT_TOL) -> int:
        p = as_projection(p, tol)
        for i, q in enumerate(self.elements):
            if p.close_to(q, tol):
                return i
        return -1


def invariant_check(p, algebra: MatrixAlgebra):
    """Whether ran(p) is invariant under the algebra and p lies in the ambient.

    Returns (invariant, defect) with
    defect = max_a ||p_perp a p|| / max(1, ||a||) over the span basis.
    """
    p = as_projection(p, algebra.tol)
    if p.dim != algebra.n:
        raise DimensionMismatch(f"projection dim {p.dim} != algebra dim {algebra.n}")
    defect = _invariance_defect(algebra.basis, p.matrix)
    in_ambient = algebra.ambient.membership_residual(p.matrix) <= algebra.tol.eq_tol * max(
        1.0, fro(p.matrix)
    )
    return (defect <= algebra.tol.eq_tol and in_ambient), defect


def join(ps, dim: int | None = None, tol: ToleranceConfig = DEFAULT_TOL) -> Projection:
    """Projection onto the smallest subspace containing all ranges.

    An empty collection joins to 0 by convention (dim required then).
    """
    ps = [as_projection(p, tol) for p in ps]
    if not ps:
        if dim is None:
            raise DimensionMismatch("empty join needs an explicit dim")
        return Projection(matrix=np.zeros((dim, dim), dtype=np.complex128), rank=0)
    n = ps[0].dim
    if any(p.dim != n for p in ps):
        raise DimensionMismatch("projections have mixed dimensions")
    cols = np.hstack([orthonormal_range(p.matrix, tol) for p in ps])
    return as_projection(range_projection(cols, tol, dim=n), tol)


def meet(ps, dim: int | None = None, tol: ToleranceConfig = DEFAULT_TOL) -> Projection:
    """Projection onto the intersection of all ranges.

    Computed from the null space of the stacked complements; an empty
    collection meets to the identity by convention.
    """
    ps = [as_projection(p, tol) for p in ps]
    if not ps:
        if dim is None:
            raise DimensionMismatch("empty meet needs an explicit dim")
        return Projection(matrix=np.eye(dim, dtype=np.complex128), rank=dim)
    n = ps[0].dim
    if any(p.dim != n for p in ps):
        raise DimensionMismatch("projections have mixed dimensions")
    eye = np.eye(n, dtype=np.complex128)
    stacked = np.vstack([eye - p.matrix for p in ps])
    basis = null_space(stacked, tol)
    return as_projection(basis @ basis.conj().T if basis.size else np.zeros((n, n)), tol)


# ---------------------------------------------------------------------------
# lattice enumeration


def _cyclic_projection(algebra: MatrixAlgebra, vectors, tol: ToleranceConfig) -> np.ndarray:
    """Projection onto span{a v : a in basis, v in vectors}."""
    v = np.column_stack([np.asarray(x, dtype=np.complex128).reshape(-1) for x in vectors])
    orbit = np.einsum("kij,jm->kim", algebra.basis, v, optimize=True)
    cols = orbit.transpose(1, 0, 2).reshape(algebra.n, -1)
    return range_projection(cols, tol, dim=algebra.n)


def _kernel_invariant_core(algebra: MatrixAlgebra, mat: np.ndarray, tol: ToleranceConfig) -> np.ndarray | None:
    """Largest invariant subspace inside ker(mat), as a projection (or None)."""
    k = null_space(mat, tol)
    n = algebra.n
    for _ in range(n + 1):
        if k.shape[1] == 0:
            return None
        pk = k @ k.conj().T
        outside = np.eye(n, dtype=np.complex128) - pk
        moved = np.einsum("ij,kjl,lm->kim", outside, algebra.basis, k, optimize=True)
        stacked = moved.transpose(0, 1, 2).reshape(-1, k.shape[1])
        coeff = null_space(stacked, tol)
        if coeff.shape[1] == k.shape[1]:
            return pk
        k = orthonormal_range(k @ coeff, tol)
    return None


def _candidate_vectors(algebra: MatrixAlgebra, rng, budget: int):
    """Seed vectors for cyclic invariant subspaces."""
    n = algebra.n
    seeds = [np.eye(n, dtype=np.complex128)[:, i] for i in range(n)]
    slices = algebra.ambient.block_slices()
    full_count = budget if len(slices) == 1 else max(budget // 2, 1)
    for _ in range(full_count):
        seeds.append(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    if len(slices) > 1:
        remaining = budget - full_count
        for t in range(remaining):
            sl = slices[t % len(slices)]
            v = np.zeros(n, dtype=np.complex128)
            d = sl.stop - sl.start
            v[sl] = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            seeds.append(v)
    return seeds


def _eigenvector_seeds(algebra: MatrixAlgebra, rng, draws: int = 3):
    """Eigenvectors of seeded generic elements: kernels of the singular
    algebra elements g - lambda, the reliable source for hidden nest
    projections."""
    out = []
    k = algebra.dim
    for _ in range(draws):
        w = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        g = np.tensordot(w, algebra.basis, axes=1)
        _, vecs = np.linalg.eig(g)
        out.extend(vecs[:, j] for j in range(vecs.shape[1]))
    return out


def _dedup_add(elements: list, cand: Projection, tol: ToleranceConfig) -> bool:
    for q in elements:
        if cand.close_to(q, tol):
            return False
    elements.append(cand)
    return True


def _sort_elements(elements):
    def key(p: Projection):
        rounded = np.round(p.matrix, 9) + 0.0
        return (p.rank, rounded.view(np.float64).tobytes())

    return sorted(elements, key=key)


def _scan_commutators(elements, tol: ToleranceConfig):
    """Largest pairwise commutator norm and the pair attaining it."""
    worst = 0.0
    pair = None
    for i in range(len(elements)):
        for j in range(i + 1, len(elements)):
            a, b = elements[i].matrix, elements[j].matrix
            c = fro(a @ b - b @ a)
            if c > worst:
                worst, pair = c, (elements[i], elements[j])
    return worst, pair


def compute_lat(algebra: MatrixAlgebra, seed: int = 0, budget: int = 64) -> ProjectionLattice:
    """Enumerate and classify the invariant-projection lattice.

    Collects cyclic invariant subspaces from seeded vectors, eigenvector
    seeds of generic elements, kernels/ranges of singular elements, and the
    ambient central projections; closes the verified invariant projections
    under join/meet.  Two non-commuting invariant projections yield NON_CSL
    with the witness pair; closure blowing past 2^min(n, 20) elements yields
    NON_CSL_SUSPECTED (diagnostic, not a proven witness).
    """
    tol = algebra.tol
    n = algebra.n
    rng = np.random.default_rng(seed)
    cap = 2 ** min(n, 20)

    candidates = []
    for v in _candidate_vectors(algebra, rng, budget):
        candidates.append(_cyclic_projection(algebra, [v], tol))
    for v in _eigenvector_seeds(algebra, rng):
        candidates.append(_cyclic_projection(algebra, [v], tol))
    for a in algebra.basis:
        candidates.append(_cyclic_projection(algebra, list(a.T), tol))
        s = np.linalg.svd(a, compute_uv=False)
        if s[-1] <= tol.rank_cutoff(s[0], n):
            core = _kernel_invariant_core(algebra, a, tol)
            if core is not None:
                candidates.append(core)
    candidates.extend(algebra.ambient.central_projections())

    elements = [
        Projection(np.zeros((n, n), dtype=np.complex128), 0),
        Projection(np.eye(n, dtype=np.complex128), n),
    ]

    def admit(mat) -> None:
        try:
            p = as_projection(mat, tol)
        except (NotProjection, DimensionMismatch):
            return
        ok, _ = invariant_check(p, algebra)
        if ok:
            _dedup_add(elements, p, tol)

    for c in candidates:
        admit(c)

    def finish(elems, classification, witness=None, complete=True):
        elems = _sort_elements(elems)
        return ProjectionLattice(
            elements=elems, classification=classification, witness=witness, complete=complete
        )

    worst, pair = _scan_commutators(elements, tol)
    if worst > 10 * tol.eq_tol:
        return finish(elements, NON_CSL, witness=pair, complete=False)
    if worst > tol.eq_tol:
        return finish(elements, NON_CSL_SUSPECTED, complete=False)

    def close(elems):
        frontier = list(elems)
        while frontier:
            fresh = []
            for p in frontier:
                for q in elems:
                    if p is q:
                        continue
                    for cand in (join([p, q], tol=tol), meet([p, q], tol=tol)):
                        if _dedup_add(elems, cand, tol):
                            fresh.append(cand)
                            if len(elems) > cap:
                                return False
            frontier = fresh
        return True

    if not close(elements):
        return finish(elements, NON_CSL_SUSPECTED, complete=False)

    # refinement: cyclic seeds from sums/differences of found basis vectors
    pool = []
    for p in elements:
        if 0 < p.rank < n:
            basis = orthonormal_range(p.matrix, tol)
            pool.extend(basis[:, j] for j in range(basis.shape[1]))
    added = False
    if len(pool) >= 2:
        n_pairs = min(budget, 4 * len(pool))
        for _ in range(n_pairs):
            i, j = rng.integers(0, len(pool), size=2)
            if i == j:
                continue
            before = len(elements)
            admit(_cyclic_projection(algebra, [pool[i] + pool[j]], tol))
            admit(_cyclic_projection(algebra, [pool[i] - pool[j]], tol))
            added = added or len(elements) > before
    if added:
        worst, pair = _scan_commutators(elements, tol)
        if worst > 10 * tol.eq_tol:
            return finish(elements, NON_CSL, witness=pair, complete=False)
        if worst > tol.eq_tol:
            return finish(elements, NON_CSL_SUSPECTED, complete=False)
        if not close(elements):
            return finish(elements, NON_CSL_SUSPECTED, complete=False)

    worst, pair = _scan_commutators(elements, tol)
    if worst > 10 * tol.eq_tol:
        return finish(elements, NON_CSL, witness=pair, complete=False)
    if worst > tol.eq_tol:
        return finish(elements, NON_CSL_SUSPECTED, complete=False)

    ordered = all(
        p.leq(q, tol) or q.leq(p, tol)
        for i, p in enumerate(elements)
        for q in elements[i + 1 :]
    )
    return finish(elements, NEST if ordered else CSL_NOT_NEST)


def atoms(lattice: ProjectionLattice, tol: ToleranceConfig = DEFAULT_TOL):
    """Atoms p - p_minus of a complete NEST or CSL lattice.

    Returns triples (atom, p, p_minus) where p_minus is the join of the
    elements strictly below p.  Atoms are pairwise orthogonal; for a nest
    they sum to the identity.
    """
    if lattice.classification not in (NEST, CSL_NOT_NEST):
        raise WrongClassification(f"atoms need NEST or CSL, got {lattice.classification}")
    if not lattice.complete:
        raise WrongClassification("atoms need a complete lattice")
    n = lattice.dim
    out = []
    for p in lattice.elements:
        below = [q for q in lattice.elements if q.leq(p, tol) and not q.close_to(p, tol)]
        p_minus = join(below, dim=n, tol=tol)
        diff = p.matrix - p_minus.matrix
        if p.rank - p_minus.rank > 0:
            out.append((Projection(diff, p.rank - p_minus.rank), p, p_minus))
    for i in range(len(out)):
        for j in range(i + 1, len(out)):
            if fro(out[i][0].matrix @ out[j][0].matrix) > 10 * tol.eq_tol:
                raise WrongClassification("atoms failed pairwise orthogonality")
    return out


def lattice_compress(lattice: ProjectionLattice, p, q, tol: ToleranceConfig = DEFAULT_TOL) -> ProjectionLattice:
    """The lattice {s : p + s in L} on the range of q - p, for p < q in L."""
    if lattice.classification not in (NEST, CSL_NOT_NEST):
        raise WrongClassification(
            f"lattice_compress needs NEST or CSL, got {lattice.classification}"
        )
    p = as_projection(p, tol)
    q = as_projection(q, tol)
    if lattice.index_of(p, tol) < 0 or lattice.index_of(q, tol) < 0:
        raise WrongClassification("p and q must be lattice elements")
    if not p.leq(q, tol) or p.close_to(q, tol):
        raise WrongClassification("p < q required")
    iso = orthonormal_range(q.matrix - p.matrix, tol)
    members = []
    for t in lattice.elements:
        if p.leq(t, tol) and t.leq(q, tol):
            s = iso.conj().T @ (t.matrix - p.matrix) @ iso
            members.append(as_projection(s, tol))
    deduped = []
    for s in members:
        _dedup_add(deduped, s, tol)
    deduped = _sort_elements(deduped)
    ordered = all(
        a.leq(b, tol) or b.leq(a, tol)
        for i, a in enumerate(deduped)
        for b in deduped[i + 1 :]
    )
    return ProjectionLattice(
        elements=deduped,
        classification=NEST if ordered else CSL_NOT_NEST,
        witness=None,
        complete=True,
    )
