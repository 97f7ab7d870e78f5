"""Subalgebras of finite-dimensional von Neumann algebras.

An algebra is stored as an orthonormal (Frobenius) span basis; membership is
an orthogonal projection residual.  The ambient algebra is always a genuine
direct sum of full matrix blocks, so its central structure is carried
explicitly as ``block_dims``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ClosureOverflow,
    DimensionMismatch,
    NotInAmbient,
    NotInvariant,
    NotStarClosed,
    NotVonNeumann,
)
from .numerics import DEFAULT_TOL, ToleranceConfig, as_cmatrix, fro, orthonormal_range

__all__ = [
    "AmbientAlgebra",
    "MatrixAlgebra",
    "ambient_algebra",
    "close_algebra",
    "contains",
    "commutant",
    "central_decomposition",
    "compress",
    "conjugate",
    "span_equal",
]


# ---------------------------------------------------------------------------
# span machinery: algebras are row spans of flattened matrices


def _orthonormal_rows(rows: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    """Orthonormal basis of the row span, rank decided by singular values."""
    if rows.shape[0] == 0:
        return rows
    u, s, vh = np.linalg.svd(rows, full_matrices=False)
    if s.size == 0:
        return rows[:0]
    cutoff = tol.rank_cutoff(s[0], max(rows.shape))
    return vh[: int(np.count_nonzero(s > cutoff))]


def _project_rows(flat: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Orthogonal projection of each row onto span(flat)."""
    return (rows @ flat.conj().T) @ flat


def _residual_rows(flat: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # project twice: cheap reorthogonalization against loss of orthogonality
    res = rows - _project_rows(flat, rows)
    res -= _project_rows(flat, res)
    return res


def _extend_rows(flat: np.ndarray, rows: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    fresh = _orthonormal_rows(_residual_rows(flat, rows), tol)
    if fresh.shape[0] == 0:
        return flat
    return np.vstack([flat, fresh])


def _span_residual(flat: np.ndarray, x: np.ndarray) -> float:
    row = x.reshape(1, -1)
    return fro(row - _project_rows(flat, row))


def _span_intersection(flat_a: np.ndarray, flat_b: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    """Orthonormal row basis of span(a) ∩ span(b).

    Null space of the concatenated orthogonal complements: a vector lies in
    both spans iff both complement projections kill it.
    """
    d = flat_a.shape[1]
    eye = np.eye(d, dtype=np.complex128)
    comp_a = eye - flat_a.conj().T @ flat_a
    comp_b = eye - flat_b.conj().T @ flat_b
    stacked = np.vstack([comp_a, comp_b])
    _, s, vh = np.linalg.svd(stacked, full_matrices=True)
    cutoff = tol.rank_cutoff(s[0], stacked.shape[0]) if s.size else 0.0
    rank = int(np.count_nonzero(s > cutoff))
    return vh[rank:].conj()


# ---------------------------------------------------------------------------
# ambient algebras


@dataclass
class AmbientAlgebra:
    """A direct sum of full matrix blocks acting on C^dim.

    ``block_dims == [dim]`` is the factor case.  ``basis`` is an orthonormal
    Frobenius basis (matrix units of the blocks), shape (k, dim, dim).
    """

    dim: int
    block_dims: tuple
    basis: np.ndarray
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    @property
    def is_factor(self) -> bool:
        return len(self.block_dims) == 1

    @property
    def flat(self) -> np.ndarray:
        return self.basis.reshape(self.basis.shape[0], -1)

    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=np.complex128)

    def block_slices(self):
        out, off = [], 0
        for d in self.block_dims:
            out.append(slice(off, off + d))
            off += d
        return out

    def central_projections(self):
        """Block indicator projections (the minimal central projections)."""
        out = []
        for sl in self.block_slices():
            p = np.zeros((self.dim, self.dim), dtype=np.complex128)
            p[sl, sl] = np.eye(sl.stop - sl.start)
            out.append(p)
        return out

    def membership_residual(self, x) -> float:
        """Frobenius distance from x to the block-diagonal span."""
        x = as_cmatrix(x)
        if x.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"expected {self.dim}x{self.dim}, got {x.shape}")
        if self.is_factor:
            return 0.0
        off = x.copy()
        for sl in self.block_slices():
            off[sl, sl] = 0.0
        return fro(off)

    def contains(self, x) -> bool:
        x = as_cmatrix(x)
        return self.membership_residual(x) <= self.tol.eq_tol * max(1.0, fro(x))

    def require_member(self, x, what: str = "matrix") -> np.ndarray:
        x = as_cmatrix(x)
        res = self.membership_residual(x)
        if res > self.tol.eq_tol * max(1.0, fro(x)):
            raise NotInAmbient(f"{what} lies outside the ambient span (residual {res:.3e})")
        return x


def ambient_algebra(block_dims, tol: ToleranceConfig = DEFAULT_TOL) -> AmbientAlgebra:
    """Build the ambient von Neumann algebra with the given block sizes."""
    dims = tuple(int(d) for d in block_dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"block dims must be positive, got {block_dims}")
    n = sum(dims)
    units = []
    off = 0
    for d in dims:
        for i in range(d):
            for j in range(d):
                e = np.zeros((n, n), dtype=np.complex128)
                e[off + i, off + j] = 1.0
                units.append(e)
        off += d
    return AmbientAlgebra(dim=n, block_dims=dims, basis=np.array(units), tol=tol)


# ---------------------------------------------------------------------------
# matrix algebras


@dataclass
class MatrixAlgebra:
    """A unital, multiplicatively closed span inside an ambient algebra."""

    ambient: AmbientAlgebra
    generators: list
    basis: np.ndarray  # (k, n, n), orthonormal in the Frobenius inner product

    @property
    def n(self) -> int:
        return self.ambient.dim

    @property
    def dim(self) -> int:
        return int(self.basis.shape[0])

    @property
    def tol(self) -> ToleranceConfig:
        return self.ambient.tol

    @property
    def flat(self) -> np.ndarray:
        return self.basis.reshape(self.dim, -1)

    def contains(self, x):
        return contains(self, x)

    def adjoint_algebra(self) -> "MatrixAlgebra":
        """The algebra of adjoints, span{a* : a in A}."""
        adj = np.conj(np.transpose(self.basis, (0, 2, 1)))
        flat = _orthonormal_rows(adj.reshape(self.dim, -1), self.tol)
        return MatrixAlgebra(
            ambient=self.ambient,
            generators=[g.conj().T for g in self.generators],
            basis=flat.reshape(-1, self.n, self.n),
        )

    def is_star_closed(self) -> bool:
        flat = self.flat
        for a in self.basis:
            if _span_residual(flat, a.conj().T) > self.tol.eq_tol:
                return False
        return True


def _products_into_span(flat: np.ndarray, left: np.ndarray, right: np.ndarray, n: int) -> np.ndarray:
    """Rows of all pairwise products left[i] @ right[j], flattened."""
    prods = np.einsum("aij,bjk->abik", left, right, optimize=True)
    return prods.reshape(-1, n * n)


def close_algebra(generators, ambient: AmbientAlgebra) -> MatrixAlgebra:
    """Smallest unital, multiplicatively closed span containing the generators.

    Iterates products until the span dimension is stationary.  The loop is
    capped at n^2 dimensions and 2n passes; the cap can only trip on a bug.
    """
    tol = ambient.tol
    n = ambient.dim
    gens = [ambient.require_member(g, "generator") for g in generators]
    seedrows = [ambient.identity.reshape(-1)] + [g.reshape(-1) for g in gens]
    flat = _orthonormal_rows(np.array(seedrows), tol)
    fresh = flat
    for _ in range(2 * n):
        mats = flat.reshape(-1, n, n)
        new = fresh.reshape(-1, n, n)
        candidates = np.vstack(
            [
                _products_into_span(flat, new, mats, n),
                _products_into_span(flat, mats, new, n),
            ]
        )
        extended = _extend_rows(flat, candidates, tol)
        if extended.shape[0] == flat.shape[0]:
            return MatrixAlgebra(ambient=ambient, generators=gens, basis=flat.reshape(-1, n, n))
        fresh = extended[flat.shape[0]:]
        flat = extended
        if flat.shape[0] > n * n:
            raise ClosureOverflow("algebra closure exceeded n^2 dimensions")
    raise ClosureOverflow("algebra closure did not stabilize in 2n passes")


def algebra_from_basis(flat_rows: np.ndarray, ambient: AmbientAlgebra, generators=None, verify: bool = True) -> MatrixAlgebra:
    """Wrap an orthonormal flat row basis as a MatrixAlgebra.

    With ``verify`` the unital and multiplicative-closure invariants are
    checked (pairwise products must project back into the span).
    """
    n = ambient.dim
    alg = MatrixAlgebra(ambient=ambient, generators=list(generators or []), basis=flat_rows.reshape(-1, n, n))
    if verify:
        tol = ambient.tol
        if _span_residual(flat_rows, ambient.identity.reshape(-1)) > tol.eq_tol:
            raise NotInAmbient("span does not contain the identity")
        prods = _products_into_span(flat_rows, alg.basis, alg.basis, n)
        res = _residual_rows(flat_rows, prods)
        worst = float(np.max(np.linalg.norm(res, axis=1))) if res.size else 0.0
        if worst > tol.eq_tol * 10:
            raise ClosureOverflow(f"span is not multiplicatively closed (residual {worst:.3e})")
    return alg


def contains(algebra: MatrixAlgebra, x):
    """Membership test; returns (member, residual).

    residual is the Frobenius distance from x to the span; membership means
    residual <= eq_tol * max(1, ||x||).
    """
    x = as_cmatrix(x)
    if x.shape != (algebra.n, algebra.n):
        raise DimensionMismatch(f"expected {algebra.n}x{algebra.n}, got {x.shape}")
    res = _span_residual(algebra.flat, x)
    return res <= algebra.tol.eq_tol * max(1.0, fro(x)), res


def commutant(mats, ambient_dim: int | None = None, tol: ToleranceConfig = DEFAULT_TOL) -> MatrixAlgebra:
    """Commutant {x : xs = sx for all s} inside the full matrix algebra.

    Computed as the joint null space of the maps x -> xs - sx.  The result
    is an algebra, and *-closed whenever the input set is.
    """
    mats = [as_cmatrix(m) for m in mats]
    if mats:
        n = mats[0].shape[0]
        if any(m.shape != (n, n) for m in mats):
            raise DimensionMismatch("commutant needs square matrices of equal size")
        if ambient_dim is not None and ambient_dim != n:
            raise DimensionMismatch(f"ambient_dim {ambient_dim} != matrix size {n}")
    else:
        if ambient_dim is None:
            raise DimensionMismatch("empty set needs an explicit ambient_dim")
        n = int(ambient_dim)
    ambient = ambient_algebra([n], tol)
    if not mats:
        return MatrixAlgebra(ambient=ambient, generators=[], basis=ambient.basis.copy())
    eye = np.eye(n, dtype=np.complex128)
    blocks = [np.kron(eye, s.T) - np.kron(s, eye) for s in mats]
    stacked = np.vstack(blocks)
    _, s, vh = np.linalg.svd(stacked, full_matrices=True)
    cutoff = tol.rank_cutoff(s[0], stacked.shape[0]) if s.size else 0.0
    rank = int(np.count_nonzero(s > cutoff))
    flat = vh[rank:].conj()
    return MatrixAlgebra(ambient=ambient, generators=[], basis=flat.reshape(-1, n, n))


def span_equal(a: MatrixAlgebra, b: MatrixAlgebra) -> bool:
    """Mutual span containment at eq_tol."""
    if a.n != b.n or a.dim != b.dim:
        return False
    tol = a.tol
    for m in a.basis:
        if _span_residual(b.flat, m) > tol.eq_tol:
            return False
    for m in b.basis:
        if _span_residual(a.flat, m) > tol.eq_tol:
            return False
    return True


def central_decomposition(algebra: MatrixAlgebra, seed: int = 0):
    """Minimal central projections of a concrete f.d. von Neumann algebra.

    Returns ``(blocks, u)``: block sizes are the ranks of the minimal central
    projections and ``u`` is a unitary aligning them with coordinates, so
    u* A u is block diagonal.  Input must be *-closed, unital, and equal to
    its double commutant.
    """
    tol = algebra.tol
    n = algebra.n
    if not algebra.is_star_closed():
        raise NotStarClosed("central_decomposition needs a *-closed algebra")
    if _span_residual(algebra.flat, np.eye(n, dtype=np.complex128).reshape(-1)) > tol.eq_tol:
        raise NotVonNeumann("central_decomposition needs a unital algebra")
    if algebra.dim == n * n:
        return [n], np.eye(n, dtype=np.complex128)
    first = commutant(list(algebra.basis), n, tol)
    second = commutant(list(first.basis), n, tol)
    if second.dim != algebra.dim:
        raise NotVonNeumann(
            f"double commutant has dimension {second.dim} != {algebra.dim}"
        )
    center_flat = _span_intersection(algebra.flat, first.flat, tol)
    center = center_flat.reshape(-1, n, n)
    herm_rows = []
    for z in center:
        herm_rows.append(((z + z.conj().T) / 2.0).reshape(-1))
        herm_rows.append(((z - z.conj().T) / 2.0j).reshape(-1))
    herm = _orthonormal_rows(np.array(herm_rows), tol).reshape(-1, n, n)
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal(herm.shape[0])
    z = np.tensordot(weights, herm, axes=1)
    z = (z + z.conj().T) / 2.0
    w, v = np.linalg.eigh(z)
    scale = max(float(np.max(np.abs(w))), 1.0)
    gap = tol.rank_cutoff(scale, n)
    clusters = []
    start = 0
    for i in range(1, n):
        if w[i] - w[i - 1] > gap:
            clusters.append(slice(start, i))
            start = i
    clusters.append(slice(start, n))
    blocks = [sl.stop - sl.start for sl in clusters]
    u = np.column_stack([v[:, sl] for sl in clusters])
    return blocks, u


def _invariance_defect(basis: np.ndarray, p: np.ndarray) -> float:
    """max over basis elements a of ||(1-p) a p|| / max(1, ||a||)."""
    n = p.shape[0]
    pperp = np.eye(n, dtype=np.complex128) - p
    moved = np.einsum("ij,kjl,lm->kim", pperp, basis, p, optimize=True)
    norms = np.linalg.norm(moved.reshape(basis.shape[0], -1), axis=1)
    scales = np.maximum(1.0, np.linalg.norm(basis.reshape(basis.shape[0], -1), axis=1))
    return float(np.max(norms / scales)) if norms.size else 0.0


def _blockwise_range_basis(p: np.ndarray, block_dims, tol: ToleranceConfig) -> np.ndarray:
    """Orthonormal basis of ran(p), columns supported on single ambient blocks.

    Requires p block diagonal; keeps downstream factors inside the ambient.
    """
    n = p.shape[0]
    cols = []
    off = 0
    for d in block_dims:
        sl = slice(off, off + d)
        sub = orthonormal_range(p[sl, sl], tol)
        lifted = np.zeros((n, sub.shape[1]), dtype=np.complex128)
        lifted[sl, :] = sub
        cols.append(lifted)
        off += d
    return np.hstack(cols) if cols else np.zeros((n, 0), dtype=np.complex128)


def compress(algebra: MatrixAlgebra, p, q) -> MatrixAlgebra:
    """Corner algebra (p-q) A (p-q) represented on the range of p - q.

    p and q must be invariant projections of the algebra with q <= p.  The
    corner is an algebra by the invariance identity
    (p-q) a (p-q) b (p-q) = (p-q) ab (p-q), which is re-verified numerically.
    """
    tol = algebra.tol
    ambient = algebra.ambient
    p = ambient.require_member(p, "p")
    q = ambient.require_member(q, "q")
    for name, proj in (("p", p), ("q", q)):
        defect = _invariance_defect(algebra.basis, proj)
        if defect > tol.eq_tol:
            raise NotInvariant(f"{name} is not invariant (defect {defect:.3e})")
    if fro(q @ p - q) > tol.eq_tol * max(1.0, fro(q)):
        raise NotInvariant("q <= p fails")
    r = p - q
    w = np.linalg.eigvalsh((r + r.conj().T) / 2.0)
    if w[0] < -tol.psd_tol * max(1.0, float(w[-1])):
        raise NotInvariant("p - q is not positive semidefinite")
    iso = _blockwise_range_basis(r, ambient.block_dims, tol)
    rank = iso.shape[1]
    if rank == 0:
        raise DimensionMismatch("p - q has rank zero; nothing to compress onto")
    sub_blocks = []
    off = 0
    for d in ambient.block_dims:
        sl = slice(off, off + d)
        br = int(np.round(np.trace(r[sl, sl]).real))
        if br > 0:
            sub_blocks.append(br)
        off += d
    new_ambient = ambient_algebra(sub_blocks, tol)
    corner = np.einsum("ui,kuv,vj->kij", iso.conj(), algebra.basis, iso, optimize=True)
    flat = _orthonormal_rows(corner.reshape(corner.shape[0], -1), tol)
    gens = [iso.conj().T @ g @ iso for g in algebra.generators]
    return algebra_from_basis(flat, new_ambient, generators=gens, verify=True)


def conjugate(algebra: MatrixAlgebra, u) -> MatrixAlgebra:
    """The algebra u* A u over the same ambient (u must preserve it)."""
    u = as_cmatrix(u)
    n = algebra.n
    if u.shape != (n, n):
        raise DimensionMismatch(f"unitary must be {n}x{n}")
    if fro(u.conj().T @ u - np.eye(n)) > algebra.tol.eq_tol * n:
        raise ValueError("conjugation needs a unitary")
    moved = np.einsum("ui,kuv,vj->kij", u.conj(), algebra.basis, u, optimize=True)
    for m in moved:
        algebra.ambient.require_member(m, "conjugated basis element")
    flat = _orthonormal_rows(moved.reshape(moved.shape[0], -1), algebra.tol)
    gens = [u.conj().T @ g @ u for g in algebra.generators]
    return MatrixAlgebra(ambient=algebra.ambient, generators=gens, basis=flat.reshape(-1, n, n))
