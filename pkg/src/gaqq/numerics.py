"""Dense symmetric / SPD linear algebra used by the solvers.

Symmetric matrices are plain ``numpy.ndarray`` objects; :func:`as_sym`
validates them and removes floating-point asymmetry by averaging with the
transpose.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import InvalidInput, NotPositiveDefinite, NotPositiveSemiDefinite

DEFAULT_EIG_FLOOR = 1e-10


class EigenPair(NamedTuple):
    values: np.ndarray   # ascending
    vectors: np.ndarray  # orthonormal columns


def as_sym(m) -> np.ndarray:
    """Return ``(m + m') / 2`` as a float array after validating shape and finiteness."""
    a = np.array(m, dtype=float, copy=True)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInput(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return 0.5 * (a + a.T)


def sym_eig(m) -> EigenPair:
    a = as_sym(m)
    values, vectors = np.linalg.eigh(a)
    return EigenPair(values, vectors)


def sqrt_spd(m, eig_floor: float = DEFAULT_EIG_FLOOR) -> np.ndarray:
    """Symmetric square root ``V diag(sqrt(max(lam, floor))) V'``.

    Slightly negative eigenvalues (down to ``-1e-10 * max|m|``) are tolerated
    and clipped to the floor, so rank-deficient scatter matrices are fine.
    """
    a = as_sym(m)
    values, vectors = np.linalg.eigh(a)
    scale = max(1.0, float(np.max(np.abs(a))))
    if values[0] < -1e-10 * scale:
        raise NotPositiveSemiDefinite(f"smallest eigenvalue {values[0]:.3e} is negative")
    root = np.sqrt(np.maximum(values, eig_floor))
    out = (vectors * root) @ vectors.T
    return 0.5 * (out + out.T)


def cholesky_lower(m) -> np.ndarray:
    a = as_sym(m)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc


def log_det_spd(m) -> float:
    chol = cholesky_lower(m)
    diag = np.diag(chol)
    if np.any(diag <= 0):
        raise NotPositiveDefinite("matrix is not positive definite")
    return 2.0 * float(np.sum(np.log(diag)))


def inv_spd(m) -> np.ndarray:
    chol = cholesky_lower(m)
    eye = np.eye(chol.shape[0])
    inv = scipy.linalg.cho_solve((chol, True), eye)
    return 0.5 * (inv + inv.T)


def pinv_sym(m, rcond: float = 1e-10):
    """Moore-Penrose inverse of a symmetric PSD matrix.

    Eigenvalues below ``rcond * lambda_max`` count as zero. Returns the
    pseudo-inverse and the log pseudo-determinant of ``m``.
    """
    values, vectors = sym_eig(m)
    cutoff = rcond * max(float(values[-1]), 0.0)
    keep = values > cutoff
    if not np.any(keep):
        return np.zeros_like(vectors), 0.0
    kept = vectors[:, keep]
    inv = (kept / values[keep]) @ kept.T
    return 0.5 * (inv + inv.T), float(np.sum(np.log(values[keep])))
