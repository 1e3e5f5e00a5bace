"""Dense linear-algebra primitives and seeded sampling.

Matrices are plain ``float64`` numpy arrays. Factorizations are delegated to
LAPACK through numpy/scipy; this module adds the validation, sign
conventions and error semantics the rest of the package relies on.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimMismatchError,
    NoConvergenceError,
    NotOrthonormalError,
    NotSpdError,
    RankDeficientError,
)

#: Tolerance on ``|a - a.T|`` (relative to ``max(1, max|a|)``).
SYMMETRY_TOL = 1e-12
#: Pivot floor for Cholesky, relative to the largest diagonal entry.
PIVOT_TOL = 1e-14
#: Minimum orthogonalized column norm relative to the largest column norm.
RANK_TOL = 1e-12
#: Reconstruction residual guaranteed by the factorizations.
FACTOR_RESIDUAL_TOL = 1e-10
#: Orthonormality tolerance accepted by :func:`principal_angles`.
ORTHONORMAL_TOL = 1e-8


def seeded_rng(seed):
    """Return a PCG64 generator for ``seed``.

    The same seed yields the same stream on every platform numpy supports.
    """
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_matrix(a, name="matrix", finite=True):
    """Coerce ``a`` to a 2-D float64 array, optionally rejecting NaN/Inf."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise DimMismatchError(f"{name} must be 2-D, got shape {m.shape}")
    if finite and not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def _check_symmetric(a):
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatchError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise NotSpdError("matrix is not symmetric")


@dataclass(frozen=True)
class SpdFactor:
    """Lower Cholesky factor ``lower`` with ``lower @ lower.T == a``."""

    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]

    def matrix(self):
        return self.lower @ self.lower.T


def cholesky_factor(a):
    """Cholesky-factor a symmetric positive definite matrix.

    Raises
    ------
    NotSpdError
        If ``a`` is not symmetric, or any squared pivot is at or below
        ``PIVOT_TOL`` times the largest diagonal entry.
    """
    a = np.asarray(a, dtype=np.float64)
    _check_symmetric(a)
    if not np.all(np.isfinite(a)):
        raise NotSpdError("matrix contains non-finite values")
    try:
        lower = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotSpdError("matrix is not positive definite") from exc
    dmax = float(np.max(np.diag(a))) if a.size else 0.0
    if a.size and np.min(np.diag(lower)) ** 2 <= PIVOT_TOL * dmax:
        raise NotSpdError("matrix is numerically singular")
    return SpdFactor(lower)


def spd_solve(factor, b):
    """Solve ``a x = b`` given ``factor = cholesky_factor(a)``."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor.dim:
        raise DimMismatchError(f"factor has dim {factor.dim}, rhs has {b.shape[0]} rows")
    return scipy.linalg.cho_solve((factor.lower, True), b)


def spd_inverse(factor):
    """Explicit symmetric inverse of the factored matrix."""
    inv = scipy.linalg.cho_solve((factor.lower, True), np.eye(factor.dim))
    return 0.5 * (inv + inv.T)


def thin_qr(a):
    """Reduced QR with ``diag(r) >= 0``.

    Returns ``(q, r)`` with ``q`` of shape ``(m, n)`` and orthonormal columns
    and ``r`` upper triangular. Column signs of ``q`` are flipped so the
    diagonal of ``r`` is non-negative, which makes the factorization unique
    for full-rank input.
    """
    a = np.asarray(a, dtype=np.float64)
    m, n = a.shape
    if m < n:
        raise DimMismatchError(f"thin_qr needs rows >= cols, got {a.shape}")
    col_norms = np.linalg.norm(a, axis=0)
    largest = float(col_norms.max()) if n else 0.0
    q, r = np.linalg.qr(a, mode="reduced")
    if n and (largest == 0.0 or np.min(np.abs(np.diag(r))) <= RANK_TOL * largest):
        raise RankDeficientError("matrix does not have full column rank")
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    q = q * signs
    r = r * signs[:, None]
    return q, np.triu(r)


def sym_eig(a):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending."""
    a = np.asarray(a, dtype=np.float64)
    _check_symmetric(a)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergenceError("symmetric eigensolver did not converge") from exc
    return w, v


def principal_angles(u1, u2):
    """Principal angles (radians, ascending) between two orthonormal bases."""
    u1 = as_matrix(u1, "u1")
    u2 = as_matrix(u2, "u2")
    if u1.shape[0] != u2.shape[0]:
        raise DimMismatchError(f"row counts differ: {u1.shape[0]} vs {u2.shape[0]}")
    for name, u in (("u1", u1), ("u2", u2)):
        gram = u.T @ u
        if np.max(np.abs(gram - np.eye(u.shape[1])), initial=0.0) > ORTHONORMAL_TOL:
            raise NotOrthonormalError(f"{name} does not have orthonormal columns")
    s = np.linalg.svd(u1.T @ u2, compute_uv=False)
    k = min(u1.shape[1], u2.shape[1])
    return np.arccos(np.clip(s[:k], 0.0, 1.0))


def gaussian_matrix(rng, rows, cols, mean=0.0, std=1.0):
    """I.i.d. normal samples drawn in row-major order."""
    if std < 0:
        raise ValueError("std must be non-negative")
    return mean + std * rng.standard_normal((rows, cols))
