"""Dense symmetric linear algebra used by the conditioning formulas.

Everything here is a pure function of its inputs. Ranks are decided with a
relative singular-value cutoff (see :class:`RankTolerance`).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NotPSD


@dataclass(frozen=True)
class RankTolerance:
    """Relative cutoff: singular values ``<= rel_threshold * sigma_max`` count as zero."""

    rel_threshold: float = 1e-10

    def __post_init__(self):
        if not (self.rel_threshold >= 0.0) or not np.isfinite(self.rel_threshold):
            raise InvalidInput(f"rel_threshold must be finite and >= 0, got {self.rel_threshold}")


DEFAULT_TOL = RankTolerance()


def _finite_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidInput(f"{name} must be a 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInput(f"{name} has non-finite entries")
    return A


def sym(A):
    """Return ``(A + A.T) / 2``; the result is exactly symmetric."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def pseudo_inverse(A, tol=DEFAULT_TOL):
    """Moore-Penrose pseudo-inverse through the SVD.

    Parameters
    ----------
    A : array_like, shape (n, m)
    tol : RankTolerance

    Returns
    -------
    ndarray, shape (m, n)
    """
    A = _finite_matrix(A)
    n, m = A.shape
    if A.size == 0:
        return np.zeros((m, n))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((m, n))
    keep = s > tol.rel_threshold * s[0]
    r = int(np.count_nonzero(keep))
    return (Vt[:r].T / s[:r]) @ U[:, :r].T


def penrose_residuals(A, P):
    """Max-abs residuals of the four Penrose conditions, in order."""
    A = np.asarray(A, dtype=float)
    P = np.asarray(P, dtype=float)
    AP = A @ P
    PA = P @ A
    return (
        np.max(np.abs(AP @ A - A), initial=0.0),
        np.max(np.abs(PA @ P - P), initial=0.0),
        np.max(np.abs(AP.T - AP), initial=0.0),
        np.max(np.abs(PA.T - PA), initial=0.0),
    )


def numerical_rank(A, tol=DEFAULT_TOL):
    """Number of singular values above ``tol.rel_threshold * sigma_max``."""
    A = _finite_matrix(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol.rel_threshold * s[0]))


def psd_sqrt(A, tol=DEFAULT_TOL):
    """Symmetric PSD square root by eigendecomposition.

    Negative eigenvalues down to ``-rel_threshold * ||A||_2`` are clamped to
    zero; anything more negative raises :class:`NotPSD`.
    """
    A = sym(_finite_matrix(A))
    if A.shape[0] != A.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {A.shape}")
    evals, evecs = np.linalg.eigh(A)
    scale = np.max(np.abs(evals), initial=0.0)
    # eigh roundoff is O(eps * ||A||); never flag below that
    floor = max(tol.rel_threshold, 64 * np.finfo(float).eps) * scale
    if evals.size and evals[0] < -floor:
        raise NotPSD(f"min eigenvalue {evals[0]:.3e} below -{floor:.3e}")
    root = np.sqrt(np.clip(evals, 0.0, None))
    return sym((evecs * root) @ evecs.T)


def psd_clamp(A):
    """Project a nominally PSD symmetric matrix onto the PSD cone."""
    A = sym(A)
    evals, evecs = np.linalg.eigh(A)
    if evals.size == 0 or evals[0] >= 0.0:
        return A
    return sym((evecs * np.clip(evals, 0.0, None)) @ evecs.T)


def psd_factors(A, tol=DEFAULT_TOL):
    """Pseudo-inverse, square root and numerical rank of stacked PSD matrices.

    ``A`` has shape (..., d, d). Each matrix is symmetrized and its negative
    eigenvalues are clamped to zero (as :func:`psd_clamp`); ranks and the
    pseudo-inverse then use the same relative cutoff as :func:`numerical_rank`.
    One batched eigendecomposition serves all three outputs.

    Returns
    -------
    pinv, root : ndarray, shape (..., d, d)
    rank : int ndarray, shape (...)
    """
    A = sym(A)
    if not np.all(np.isfinite(A)):
        raise InvalidInput("A has non-finite entries")
    evals, evecs = np.linalg.eigh(A)
    evals = np.clip(evals, 0.0, None)
    top = evals[..., -1:]
    keep = (evals > tol.rel_threshold * top) & (top > 0.0)
    inv = np.where(keep, 1.0 / np.where(keep, evals, 1.0), 0.0)
    Vt = np.swapaxes(evecs, -1, -2)
    pinv = sym((evecs * inv[..., None, :]) @ Vt)
    root = sym((evecs * np.sqrt(evals)[..., None, :]) @ Vt)
    return pinv, root, np.count_nonzero(keep, axis=-1)


def schur_complement(M, n_first, tol=DEFAULT_TOL):
    """``A - B D^+ B^T`` for ``M = [[A, B], [B^T, D]]`` with ``A`` of size ``n_first``."""
    M = _finite_matrix(M, "M")
    n = M.shape[0]
    if M.shape[1] != n or not (0 < n_first < n):
        raise InvalidInput(f"cannot split a {M.shape} matrix after row {n_first}")
    A = M[:n_first, :n_first]
    B = M[:n_first, n_first:]
    D = M[n_first:, n_first:]
    return sym(A - B @ pseudo_inverse(D, tol) @ B.T)
