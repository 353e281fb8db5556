"""Dense numerical kernels used by every other module.

Thin wrappers over LAPACK-backed routines that add input validation, a
deterministic sign convention for factor columns, and log-space
determinants (raw determinants are never formed).
"""

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, SingularMatrixError


def _as_matrix(A, name="matrix"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def _require_symmetric(A, name="matrix"):
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"{name} must be square, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and float(np.max(np.abs(A - A.T))) > 1e-10 * scale:
        raise InvalidInputError(f"{name} is not symmetric")


def fix_signs(U, *companions):
    """Flip factor columns so the largest-magnitude entry of each is positive.

    Ties break at the lowest row index. Companion matrices receive the
    same flips, so products like U @ diag(d) @ V.T are unchanged.
    """
    U = U.copy()
    companions = [C.copy() for C in companions]
    for j in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, j])))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
            for C in companions:
                C[:, j] = -C[:, j]
    if companions:
        return (U, *companions)
    return U


def thin_svd(A):
    """Thin singular value decomposition with the deterministic sign rule.

    Returns (U, d, V) with A = U @ diag(d) @ V.T, d non-negative and
    non-increasing, and U, V orthonormal in columns.
    """
    A = _as_matrix(A, "A")
    U, d, Vt = np.linalg.svd(A, full_matrices=False)
    U, V = fix_signs(U, Vt.T)
    return U, d, V


def spd_solve(A, Y):
    """Solve A @ Z = Y for symmetric positive-definite A via Cholesky.

    Returns (Z, logdet) where logdet is log det A read off the Cholesky
    factor.
    """
    A = _as_matrix(A, "A")
    Y = np.asarray(Y, dtype=float)
    if not np.all(np.isfinite(Y)):
        raise InvalidInputError("right-hand side contains non-finite entries")
    _require_symmetric(A, "A")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("matrix is not positive-definite") from None
    Z = scipy.linalg.cho_solve(factor, Y)
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    return Z, logdet


def sym_eig(A):
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues, eigenvectors) with eigenvalues in non-increasing
    order and sign-fixed orthonormal eigenvector columns.
    """
    A = _as_matrix(A, "A")
    _require_symmetric(A, "A")
    w, V = np.linalg.eigh(A)
    order = np.argsort(-w, kind="stable")
    return w[order], fix_signs(V[:, order])
