"""Structural CSR operations shared by every other module.

All matrices are ``scipy.sparse.csr_matrix`` with float64 values. Functions in
this module always hand back canonical CSR: sorted, duplicate-free column
indices in every row and no stored zeros unless ``keep_zeros`` is requested.
"""
import numpy as np
import scipy.io
import scipy.sparse as sp

__all__ = ['as_csr', 'canonicalize', 'is_canonical', 'spmv', 'transpose',
           'matmul', 'triple_product', 'entry_keys', 'gather_entries', 'extract_submatrix',
           'filter_small', 'mmwrite', 'mmread']


def canonicalize(A, keep_zeros=False):
    """Return a canonical float64 CSR copy of ``A``.

    Duplicate entries are summed, column indices sorted and (unless
    ``keep_zeros``) explicit zeros removed.
    """
    A = sp.csr_matrix(A, dtype=np.float64, copy=True)
    A.sum_duplicates()
    if not keep_zeros:
        A.eliminate_zeros()
    A.sort_indices()
    A.indptr = A.indptr.astype(np.int64, copy=False)
    A.indices = A.indices.astype(np.int64, copy=False)
    return A


def as_csr(A):
    """Coerce ``A`` to canonical CSR, skipping the copy when already canonical."""
    if sp.isspmatrix_csr(A) and A.dtype == np.float64 and is_canonical(A):
        return A
    return canonicalize(A)


def is_canonical(A):
    """True if every row of the CSR matrix has strictly increasing columns."""
    indptr, indices = A.indptr, A.indices
    if indptr[0] != 0 or indptr[-1] != len(indices) or np.any(np.diff(indptr) < 0):
        return False
    if len(indices) < 2:
        return True
    step = np.diff(indices)
    # positions where a new row starts are exempt from the ordering check
    row_start = np.zeros(len(indices), dtype=bool)
    row_start[indptr[1:-1][indptr[1:-1] < len(indices)]] = True
    return bool(np.all((step > 0) | row_start[1:]))


def spmv(A, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[1]:
        raise ValueError(f'dimension mismatch: A is {A.shape}, x has length {x.shape[0]}')
    return A @ x


def transpose(A):
    return canonicalize(A.T)


def matmul(A, B):
    if A.shape[1] != B.shape[0]:
        raise ValueError(f'dimension mismatch: {A.shape} @ {B.shape}')
    return canonicalize(A @ B)


def triple_product(R, A, P):
    """Galerkin coarse operator ``R A P``."""
    if R.shape[1] != A.shape[0] or A.shape[1] != P.shape[0]:
        raise ValueError(f'dimension mismatch: {R.shape} x {A.shape} x {P.shape}')
    return canonicalize(R @ (A @ P))


def entry_keys(A):
    rows = np.repeat(np.arange(A.shape[0], dtype=np.int64), np.diff(A.indptr))
    return rows * A.shape[1] + A.indices.astype(np.int64)


def gather_entries(A, rows, cols, keys=None):
    """Vectorized lookup of ``A[rows, cols]`` for broadcastable index arrays.

    Entries absent from the sparsity pattern read as zero. ``keys`` may hold
    the precomputed row-major entry keys of ``A`` (see ``entry_keys``) when the
    same matrix is queried many times. ``A`` must be canonical.
    """
    rows, cols = np.broadcast_arrays(np.asarray(rows, dtype=np.int64),
                                     np.asarray(cols, dtype=np.int64))
    if keys is None:
        keys = entry_keys(A)
    q = rows * A.shape[1] + cols
    if len(keys) == 0:
        return np.zeros(q.shape)
    pos = np.minimum(np.searchsorted(keys, q), len(keys) - 1)
    hit = keys[pos] == q
    return np.where(hit, A.data[pos], 0.0)


def extract_submatrix(A, rows, cols):
    """Dense block ``A[rows][:, cols]`` with zeros where nothing is stored."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    for name, idx, bound in (('row', rows, A.shape[0]), ('column', cols, A.shape[1])):
        if idx.size and (idx.min() < 0 or idx.max() >= bound):
            raise IndexError(f'{name} index out of range for shape {A.shape}')
    return gather_entries(A, rows[:, None], cols[None, :])


def filter_small(A, drop_tol):
    """Drop off-diagonal entries that are small relative to their row.

    Entry ``a_ij`` (``i != j``) is removed when ``|a_ij| < drop_tol * max_{k != i} |a_ik|``.
    Diagonal entries are always kept and nothing is lumped.
    """
    if drop_tol < 0:
        raise ValueError('drop_tol must be nonnegative')
    A = as_csr(A)
    if drop_tol == 0:
        return A.copy()
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    offdiag = rows != A.indices
    mag = np.where(offdiag, np.abs(A.data), 0.0)
    rowmax = np.zeros(A.shape[0])
    np.maximum.at(rowmax, rows, mag)
    keep = ~offdiag | (mag >= drop_tol * rowmax[rows])
    B = sp.csr_matrix((A.data[keep], A.indices[keep], np.concatenate(
        ([0], np.cumsum(np.bincount(rows[keep], minlength=A.shape[0]))))), shape=A.shape)
    return canonicalize(B)


def mmwrite(path, A, comment=''):
    """Write ``A`` as a real general Matrix Market coordinate file (17 digits)."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field='real',
                     precision=17, symmetry='general')


def mmread(path):
    return canonicalize(scipy.io.mmread(str(path)))
