"""Dense complex linear algebra substrate.

Every rank, equality, and positivity decision in the library routes through
a single :class:`ToleranceConfig`, so downstream theorem checks are
tolerance decisions with one knob.  Matrices are plain complex ndarrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotPositiveDefinite

_EPS = float(np.finfo(np.float64).eps)


@dataclass(frozen=True)
class ToleranceConfig:
    """Central tolerance policy.

    eq_tol     relative threshold for matrix equality / membership residuals
    rank_tol   relative singular-value threshold; None means dim * eps
    psd_tol    relative eigenvalue floor for positive definiteness
    rank_floor absolute floor for the singular-value cutoff
    """

    eq_tol: float = 1e-9
    rank_tol: float | None = None
    psd_tol: float = 1e-10
    rank_floor: float = 1e-12

    def __post_init__(self):
        if self.eq_tol <= 0 or self.psd_tol <= 0 or self.rank_floor <= 0:
            raise ValueError("tolerances must be strictly positive")
        if self.rank_tol is not None and self.rank_tol <= 0:
            raise ValueError("rank_tol must be strictly positive")

    def rank_cutoff(self, smax: float, dim: int) -> float:
        """Singular-value cutoff for a problem of size ``dim`` and scale ``smax``."""
        rel = self.rank_tol if self.rank_tol is not None else dim * _EPS
        return max(rel * float(smax), self.rank_floor)


DEFAULT_TOL = ToleranceConfig()


def as_cmatrix(x) -> np.ndarray:
    """Coerce to a 2-d complex matrix and reject non-finite entries."""
    m = np.asarray(x, dtype=np.complex128)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise DimensionMismatch(f"expected a matrix, got shape {np.shape(x)}")
    if not np.all(np.isfinite(m.view(np.float64))):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def fro(x) -> float:
    return float(np.linalg.norm(x))


def opnorm(x) -> float:
    """Spectral (operator 2-) norm."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    return float(np.linalg.norm(x, 2))


def mat_close(a, b, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    """Relative Frobenius equality at eq_tol."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.shape != b.shape:
        return False
    scale = max(1.0, fro(b))
    return fro(a - b) <= tol.eq_tol * scale


def is_hermitian(x, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        return False
    return fro(x - x.conj().T) <= tol.eq_tol * max(1.0, fro(x))


def hermitian_eig(x, tol: ToleranceConfig = DEFAULT_TOL):
    """Eigendecomposition of a hermitian matrix.

    Returns ``(w, v)`` with ``w`` real ascending and ``v`` unitary such that
    ``x = v @ diag(w) @ v.conj().T``.  Raises on non-square or non-hermitian
    input (checked at eq_tol relative to ``||x||``).
    """
    x = as_cmatrix(x)
    if x.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {x.shape}")
    if not is_hermitian(x, tol):
        raise NotHermitian(f"deviation from hermitian exceeds eq_tol={tol.eq_tol}")
    w, v = np.linalg.eigh((x + x.conj().T) / 2.0)
    return w, v


def singular_values(x) -> np.ndarray:
    return np.linalg.svd(as_cmatrix(x), compute_uv=False)


def rank_of(x, tol: ToleranceConfig = DEFAULT_TOL) -> int:
    """Numerical rank via singular values."""
    x = as_cmatrix(x)
    s = np.linalg.svd(x, compute_uv=False)
    if s.size == 0:
        return 0
    cutoff = tol.rank_cutoff(s[0], max(x.shape))
    return int(np.count_nonzero(s > cutoff))


def orthonormal_range(x, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the column space of ``x``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.shape[1] == 0:
        return np.zeros((x.shape[0], 0), dtype=np.complex128)
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    if s.size == 0:
        return np.zeros((x.shape[0], 0), dtype=np.complex128)
    cutoff = tol.rank_cutoff(s[0], max(x.shape))
    return u[:, s > cutoff]


def null_space(x, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the kernel of ``x``."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    m, n = x.shape
    if m == 0:
        return np.eye(n, dtype=np.complex128)
    _, s, vh = np.linalg.svd(x, full_matrices=True)
    cutoff = tol.rank_cutoff(s[0], max(m, n)) if s.size else 0.0
    rank = int(np.count_nonzero(s > cutoff))
    return vh[rank:].conj().T


def range_projection(vectors, tol: ToleranceConfig = DEFAULT_TOL, dim: int | None = None) -> np.ndarray:
    """Hermitian idempotent projecting onto the span of the given columns.

    ``vectors`` may be a list of vectors or an (n, k) matrix of columns.  An
    empty collection yields the zero matrix; ``dim`` is then required.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        cols = vectors.astype(np.complex128, copy=False)
    else:
        vecs = [np.asarray(v, dtype=np.complex128).reshape(-1) for v in vectors]
        if not vecs:
            if dim is None:
                raise DimensionMismatch("empty span needs an explicit dim")
            return np.zeros((dim, dim), dtype=np.complex128)
        n = vecs[0].shape[0]
        if any(v.shape[0] != n for v in vecs):
            raise DimensionMismatch("vectors have mixed dimensions")
        cols = np.column_stack(vecs)
    if cols.shape[1] == 0:
        n = cols.shape[0] if dim is None else dim
        return np.zeros((n, n), dtype=np.complex128)
    basis = orthonormal_range(cols, tol)
    return basis @ basis.conj().T


def cholesky_upper(x, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Upper-triangular factor ``u`` with positive real diagonal and ``u* u = x``.

    ``x`` must be hermitian positive definite: the smallest eigenvalue has to
    clear ``psd_tol * ||x||``.
    """
    x = as_cmatrix(x)
    if x.shape[0] != x.shape[1]:
        raise DimensionMismatch(f"square matrix required, got {x.shape}")
    if not is_hermitian(x, tol):
        raise NotHermitian("cholesky_upper needs a hermitian input")
    xh = (x + x.conj().T) / 2.0
    w = np.linalg.eigvalsh(xh)
    scale = max(abs(float(w[0])), abs(float(w[-1])))
    if w[0] <= tol.psd_tol * max(scale, 1e-300):
        raise NotPositiveDefinite(
            f"smallest eigenvalue {w[0]:.3e} below psd_tol*||x|| = {tol.psd_tol * scale:.3e}"
        )
    lower = np.linalg.cholesky(xh)
    return lower.conj().T
