"""Weighted Jacobi in the reduction pattern (C/F sub-sweeps)."""
from dataclasses import dataclass

import numpy as np

from .linalg import estimate_spectral_radius
from .sparse import as_csr

__all__ = ['RelaxConfig', 'jacobi_weight', 'jacobi_sweep', 'cff_sweep', 'ffc_sweep',
           'SubsetJacobi']

PATTERNS = ('CFF', 'FFC', 'F_only', 'Global')


@dataclass(frozen=True)
class RelaxConfig:
    weight: float = 1.0
    pattern: str = 'CFF'
    weighted_postsmoothing: bool = True

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight <= 0:
            raise ValueError('relaxation weight must be finite and positive')
        if self.pattern not in PATTERNS:
            raise ValueError(f'unknown relaxation pattern {self.pattern!r}')


def jacobi_weight(A, iters=15):
    """``1 / rho(D^{-1} A)`` with rho from an Arnoldi estimate."""
    A = as_csr(A)
    d = A.diagonal()
    if np.any(d == 0):
        raise ValueError('zero diagonal entry')
    DinvA = as_csr(A.multiply(1.0 / d[:, None]))
    return 1.0 / estimate_spectral_radius(DinvA, iters)


class SubsetJacobi:
    """Cached row blocks of ``A`` for repeated Jacobi sweeps over fixed subsets."""

    def __init__(self, A, is_c=None):
        self.A = as_csr(A)
        n = self.A.shape[0]
        self.diag = self.A.diagonal()
        is_c = np.zeros(n, dtype=bool) if is_c is None else np.asarray(is_c, dtype=bool)
        self._blocks = {}
        for name, idx in (('C', np.flatnonzero(is_c)), ('F', np.flatnonzero(~is_c)),
                          ('all', np.arange(n))):
            d = self.diag[idx]
            if np.any(d == 0):
                # checked lazily so unused subsets with zero diagonal don't fail
                d = None
            self._blocks[name] = (idx, self.A[idx], d)

    def sweep(self, x, b, weight, subset):
        idx, rows, d = self._blocks[subset]
        if len(idx) == 0:
            return x
        if d is None:
            raise ZeroDivisionError(f'zero diagonal entry in {subset} subset')
        x = x.copy()
        x[idx] += weight * (b[idx] - rows @ x) / d
        return x

    def cff(self, x, b, weight):
        for s in ('C', 'F', 'F'):
            x = self.sweep(x, b, weight, s)
        return x

    def ffc(self, x, b, weight):
        for s in ('F', 'F', 'C'):
            x = self.sweep(x, b, weight, s)
        return x


def _subset_index(n, subset):
    if isinstance(subset, str):
        if subset != 'all':
            raise ValueError("string subsets other than 'all' need a splitting")
        return np.arange(n)
    subset = np.asarray(subset)
    if subset.dtype == bool:
        return np.flatnonzero(subset)
    return subset.astype(np.int64)


def jacobi_sweep(A, x, b, weight, subset='all'):
    """One weighted Jacobi sweep restricted to ``subset``.

    ``x_i <- x_i + weight * (b_i - (A x)_i) / a_ii`` for ``i`` in the subset,
    every residual evaluated with the incoming ``x``. Entries outside the
    subset are returned untouched.
    """
    A = as_csr(A)
    x = np.array(x, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    idx = _subset_index(A.shape[0], subset)
    if len(idx) == 0:
        return x
    d = A.diagonal()[idx]
    if np.any(d == 0):
        raise ZeroDivisionError('zero diagonal entry in relaxation subset')
    x[idx] += weight * (b[idx] - A[idx] @ x) / d
    return x


def cff_sweep(A, x, b, is_c, weight):
    """Jacobi on C-points, then twice on F-points; each stage sees the latest ``x``."""
    return SubsetJacobi(A, is_c).cff(np.array(x, dtype=np.float64),
                                     np.asarray(b, dtype=np.float64), weight)


def ffc_sweep(A, x, b, is_c, weight):
    return SubsetJacobi(A, is_c).ffc(np.array(x, dtype=np.float64),
                                     np.asarray(b, dtype=np.float64), weight)
