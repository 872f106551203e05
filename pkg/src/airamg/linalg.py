"""Small dense kernels and the Arnoldi spectral-radius estimate."""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

__all__ = ['SingularMatrixError', 'SvdResult', 'lu_solve', 'min_norm_ls',
           'pinv', 'svd', 'estimate_spectral_radius']

PIVOT_TOL = 1e-14
PINV_RCOND = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SvdResult:
    """Singular value decomposition ``M = U diag(s) V^T`` with ``s`` ascending."""
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray


def lu_solve(M, rhs):
    """Solve ``M X = rhs`` by LU with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot is smaller than ``1e-14 * max|M|``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    rhs = np.asarray(rhs, dtype=np.float64)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f'lu_solve needs a square matrix, got {M.shape}')
    if M.size == 0:
        return np.zeros_like(rhs)
    scale = np.abs(M).max()
    if scale == 0:
        raise SingularMatrixError('zero matrix')
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    if np.abs(np.diag(lu)).min() < PIVOT_TOL * scale:
        raise SingularMatrixError('pivot below tolerance')
    return sla.lu_solve((lu, piv), rhs, check_finite=False)


def pinv(M, rcond=PINV_RCOND):
    """Pseudoinverse, truncating singular values below ``rcond * sigma_max``.

    Accepts stacks of matrices (``(..., m, n)``).
    """
    return np.linalg.pinv(np.asarray(M, dtype=np.float64), rcond=rcond)


def min_norm_ls(M, rhs):
    """Minimum-norm least-squares solution of ``M x = rhs``."""
    return pinv(M) @ np.asarray(rhs, dtype=np.float64)


def svd(M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    try:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f'SVD did not converge for {M.shape} matrix') from exc
    order = np.argsort(s, kind='stable')
    return SvdResult(U=U[:, order], singular_values=s[order], V=Vt[order].T)


def estimate_spectral_radius(A, iters=15):
    """Largest Ritz value magnitude after ``iters`` Arnoldi steps.

    The start vector is a fixed-seed random vector, so the estimate is
    deterministic without favouring the smooth (near-null) modes. On breakdown the Ritz values of the leading block of the
    Hessenberg matrix are used.
    """
    if A.shape[0] != A.shape[1]:
        raise ValueError('spectral radius needs a square operator')
    if iters < 1:
        raise ValueError('iters must be >= 1')
    n = A.shape[0]
    iters = min(iters, n)
    V = np.zeros((iters + 1, n))
    H = np.zeros((iters + 1, iters))
    v0 = np.random.default_rng(0).random(n) + 0.5
    V[0] = v0 / np.linalg.norm(v0)
    m = iters
    for j in range(iters):
        w = A @ V[j]
        # modified Gram-Schmidt, applied twice for stability
        for _ in range(2):
            for i in range(j + 1):
                h = V[i] @ w
                H[i, j] += h
                w -= h * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        if H[j + 1, j] <= 1e-12 * max(np.abs(H[:j + 2, :j + 1]).max(), 1e-300):
            m = j + 1
            break
        V[j + 1] = w / H[j + 1, j]
    return float(np.abs(np.linalg.eigvals(H[:m, :m])).max())
