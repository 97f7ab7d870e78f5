"""Canonical decomposition of a pair of orthogonal projections.

A pair (P, Q) splits the space into the four intersection corners plus two
copies of a generic subspace, on which Q takes the principal-angle form
[[c^2, cs], [cs, s^2]] against P = [[1, 0], [0, 0]], with commuting positive
contractions c, s satisfying c^2 + s^2 = 1 and trivial kernels.

Everything is driven by the spectrum of the difference P - Q: eigenvalue +1
is ran P meet ker Q, -1 is ker P meet ran Q, the kernel splits into the two
commuting corners, and the open bands carry the generic part in +/- pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NestlabError
from .lattice import Projection, as_projection
from .numerics import DEFAULT_TOL, ToleranceConfig, fro, orthonormal_range

__all__ = ["HalmosDecomposition", "halmos_decompose", "commutes_iff_no_generic"]


@dataclass
class HalmosDecomposition:
    """Six-part decomposition of a projection pair.

    corner_both         ran P meet ran Q
    corner_only_first   ran P meet ker Q
    corner_only_second  ker P meet ran Q
    corner_neither      ker P meet ker Q
    generic_dim         dimension of one copy of the generic subspace
    adapted_basis       unitary whose columns list the corner bases followed
                        by the two generic copies
    cos_factor, sin_factor
                        commuting positive contractions (generic_dim square)
                        with cos^2 + sin^2 = 1 and trivial kernels
    """

    corner_both: Projection
    corner_only_first: Projection
    corner_only_second: Projection
    corner_neither: Projection
    generic_dim: int
    adapted_basis: np.ndarray
    cos_factor: np.ndarray
    sin_factor: np.ndarray

    @property
    def dim(self) -> int:
        return self.adapted_basis.shape[0]

    def corner_ranks(self):
        return (
            self.corner_both.rank,
            self.corner_only_first.rank,
            self.corner_only_second.rank,
            self.corner_neither.rank,
        )

    def first_canonical(self) -> np.ndarray:
        """P in the adapted basis: 1, 1, 0, 0, 1, 0 down the blocks."""
        r11, r10, r01, r00 = self.corner_ranks()
        k = self.generic_dim
        d = np.concatenate(
            [np.ones(r11), np.ones(r10), np.zeros(r01), np.zeros(r00), np.ones(k), np.zeros(k)]
        )
        return np.diag(d).astype(np.complex128)

    def second_canonical(self) -> np.ndarray:
        """Q in the adapted basis: 1, 0, 1, 0, then the principal-angle block."""
        r11, r10, r01, r00 = self.corner_ranks()
        k = self.generic_dim
        n = self.dim
        out = np.zeros((n, n), dtype=np.complex128)
        out[:r11, :r11] = np.eye(r11)
        off = r11 + r10
        out[off: off + r01, off: off + r01] = np.eye(r01)
        off += r01 + r00
        c, s = self.cos_factor, self.sin_factor
        out[off: off + k, off: off + k] = c @ c
        out[off: off + k, off + k: off + 2 * k] = c @ s
        out[off + k: off + 2 * k, off: off + k] = c @ s
        out[off + k: off + 2 * k, off + k: off + 2 * k] = s @ s
        return out

    def reconstruct(self):
        """(P, Q) rebuilt from the canonical block forms."""
        u = self.adapted_basis
        return u @ self.first_canonical() @ u.conj().T, u @ self.second_canonical() @ u.conj().T


def halmos_decompose(p, q, tol: ToleranceConfig = DEFAULT_TOL) -> HalmosDecomposition:
    p = as_projection(p, tol)
    q = as_projection(q, tol)
    if p.dim != q.dim:
        raise DimensionMismatch(f"projection dims differ: {p.dim} vs {q.dim}")
    n = p.dim
    pm, qm = p.matrix, q.matrix
    diff = pm - qm
    w, v = np.linalg.eigh((diff + diff.conj().T) / 2.0)
    band = tol.rank_cutoff(1.0, n)

    plus = w >= 1.0 - band
    minus = w <= -1.0 + band
    zero = np.abs(w) <= band
    generic_mask = ~(plus | minus | zero)
    cols_only_first = v[:, plus]
    cols_only_second = v[:, minus]

    v0 = v[:, zero]
    if v0.shape[1]:
        # P and Q agree on ker(P - Q); split it by the compression of P
        w0, u0 = np.linalg.eigh(v0.conj().T @ pm @ v0)
        hi = w0 > 0.5
        cols_both = v0 @ u0[:, hi]
        cols_neither = v0 @ u0[:, ~hi]
    else:
        cols_both = np.zeros((n, 0), dtype=np.complex128)
        cols_neither = np.zeros((n, 0), dtype=np.complex128)

    gen_count = int(np.count_nonzero(generic_mask))
    if gen_count % 2:
        raise NestlabError("generic spectrum of P - Q failed +/- pairing")
    k = gen_count // 2
    if k:
        g_cols = v[:, generic_mask]
        g_proj = g_cols @ g_cols.conj().T
        first_copy = orthonormal_range(pm @ g_proj, tol)
        if first_copy.shape[1] != k:
            raise NestlabError("generic copy of ran(P) has unexpected dimension")
        t = first_copy.conj().T @ qm @ first_copy
        vals, vecs = np.linalg.eigh((t + t.conj().T) / 2.0)
        order = np.argsort(-vals)  # cosines descending, for reproducible bases
        vals, vecs = vals[order], vecs[:, order]
        first_copy = first_copy @ vecs
        cosines = np.sqrt(np.clip(vals, 0.0, 1.0))
        sines = np.sqrt(np.clip(1.0 - vals, 0.0, 1.0))
        second_copy = (qm @ first_copy - first_copy * vals[None, :]) / (cosines * sines)[None, :]
    else:
        cosines = np.zeros(0)
        sines = np.zeros(0)
        first_copy = np.zeros((n, 0), dtype=np.complex128)
        second_copy = np.zeros((n, 0), dtype=np.complex128)

    corner_cols = [cols_both, cols_only_first, cols_only_second, cols_neither]
    u = np.hstack(corner_cols + [first_copy, second_copy])
    if u.shape[1] != n:
        raise NestlabError(f"adapted basis has {u.shape[1]} columns, expected {n}")
    if fro(u.conj().T @ u - np.eye(n)) > tol.eq_tol * n:
        raise NestlabError("adapted basis failed unitarity")

    def corner(c):
        mat = c @ c.conj().T if c.shape[1] else np.zeros((n, n), dtype=np.complex128)
        return as_projection(mat, tol)

    dec = HalmosDecomposition(
        corner_both=corner(cols_both),
        corner_only_first=corner(cols_only_first),
        corner_only_second=corner(cols_only_second),
        corner_neither=corner(cols_neither),
        generic_dim=k,
        adapted_basis=u,
        cos_factor=np.diag(cosines).astype(np.complex128),
        sin_factor=np.diag(sines).astype(np.complex128),
    )
    _verify(dec, pm, qm, tol)
    return dec


def _verify(dec: HalmosDecomposition, pm, qm, tol: ToleranceConfig):
    k = dec.generic_dim
    n = dec.dim
    if sum(dec.corner_ranks()) + 2 * k != n:
        raise NestlabError("corner ranks and generic part do not fill the space")
    if k:
        c, s = dec.cos_factor, dec.sin_factor
        if fro(c @ s - s @ c) > tol.eq_tol:
            raise NestlabError("cos/sin factors do not commute")
        if fro(c @ c + s @ s - np.eye(k)) > tol.eq_tol:
            raise NestlabError("cos^2 + sin^2 != 1")
        smin = min(
            np.linalg.svd(c, compute_uv=False)[-1],
            np.linalg.svd(s, compute_uv=False)[-1],
        )
        if smin <= tol.rank_cutoff(1.0, n):
            raise NestlabError("cos/sin factor has a kernel; band splitting failed")
    p_rec, q_rec = dec.reconstruct()
    scale = max(1.0, fro(pm), fro(qm))
    if fro(p_rec - pm) > tol.eq_tol * scale or fro(q_rec - qm) > tol.eq_tol * scale:
        raise NestlabError("reconstruction from canonical form failed")


def commutes_iff_no_generic(p, q, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """||PQ - QP|| <= eq_tol, cross-checked against generic_dim == 0."""
    p = as_projection(p, tol)
    q = as_projection(q, tol)
    commutes = fro(p.matrix @ q.matrix - q.matrix @ p.matrix) <= tol.eq_tol * max(
        1.0, fro(p.matrix), fro(q.matrix)
    )
    dec = halmos_decompose(p, q, tol)
    if commutes != (dec.generic_dim == 0):
        raise NestlabError("commutator test and generic dimension disagree")
    return commutes
