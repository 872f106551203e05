"""Transfer operators: classical RS interpolation, lAIR restriction and
constrained lAIR (CLAIR).

CLAIR builds the F-rows ``W`` of ``P = [W; I]`` one coarse column at a time,
like lAIR, while fitting user supplied near-nullspace modes ``B`` into the
range of ``P`` (``P B_c = B``). The mode constraint couples only entries of a
single F-row, so it is applied row by row with small pseudoinverses and the
global constraint matrix is never formed.
"""
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .linalg import SingularMatrixError, lu_solve, min_norm_ls, pinv
from .partition import CfSplitting
from .relaxation import SubsetJacobi, jacobi_weight
from .sparse import as_csr, canonicalize, entry_keys, gather_entries

__all__ = ['TransferConfig', 'TransferOperator', 'binary_pattern', 'fc_base_pattern',
           'build_sparsity_pattern', 'lair_pattern', 'classical_interpolation',
           'lair_restriction', 'clair_transfer', 'smooth_constraints',
           'project_row_updates']

BATCH = 4096


@dataclass(frozen=True)
class TransferConfig:
    """Knobs of the CLAIR construction.

    ``B=None`` means the constant vector. ``constrain=False`` turns off the
    mode constraint (lines that fit and protect ``P B_c = B``), which reduces
    the method to plain lAIR-style local solves.
    """
    coarsen_type: str = 'Agg'
    degree: int = 2
    interp_theta: float = 0.5
    B: Optional[np.ndarray] = None
    smoothing_steps: int = 5
    inverse: str = 'ExactLU'
    iterations: int = 1
    build_R_from: str = 'PTranspose'
    constrain: bool = True

    def __post_init__(self):
        if self.coarsen_type not in ('FC', 'Agg'):
            raise ValueError(f'coarsen_type must be FC or Agg, got {self.coarsen_type!r}')
        if self.inverse not in ('ExactLU', 'Diagonal'):
            raise ValueError(f'inverse must be ExactLU or Diagonal, got {self.inverse!r}')
        if self.build_R_from not in ('PTranspose', 'TransposeOfA'):
            raise ValueError(f'unknown build_R_from {self.build_R_from!r}')
        if self.degree < 1 or self.iterations < 1 or self.smoothing_steps < 0:
            raise ValueError('degree and iterations must be >= 1, smoothing_steps >= 0')
        if self.B is not None:
            B = np.asarray(self.B, dtype=np.float64)
            if B.ndim == 1:
                B = B[:, None]
            if np.any(np.abs(B).max(axis=0) == 0):
                raise ValueError('constraint vectors must not contain a zero column')
            object.__setattr__(self, 'B', B)


@dataclass
class TransferOperator:
    """``P`` (n x n_c) or ``R`` (n_c x n) together with its splitting."""
    matrix: sp.csr_matrix
    splitting: CfSplitting
    diagnostics: Counter = field(default_factory=Counter)

    @property
    def shape(self):
        return self.matrix.shape


def binary_pattern(M):
    M = as_csr(M)
    return sp.csr_matrix((np.ones(M.nnz), M.indices.copy(), M.indptr.copy()), shape=M.shape)


def _strength_with_identity(S):
    G = binary_pattern(S.graph)
    return canonicalize(G + sp.identity(G.shape[0], format='csr'))


def _injection(splitting, shape_rows=True):
    """``n x n_c`` matrix with a 1 at (C-point, its coarse index)."""
    n, nc = splitting.n, splitting.c_count
    I = sp.csr_matrix((np.ones(nc), (splitting.c_points, np.arange(nc))), shape=(n, nc))
    return I if shape_rows else I.T.tocsr()


def fc_base_pattern(S, splitting):
    """Base pattern ``[S_fc; I]`` for classical (FC) coarsening, n x n_c."""
    G = binary_pattern(S.graph)
    Gfc = G[:, splitting.c_points]
    Gfc = sp.diags((~splitting.is_c).astype(float)) @ Gfc
    return binary_pattern(canonicalize(Gfc + _injection(splitting)))


def build_sparsity_pattern(S, T_base, degree, splitting):
    """F-rows of the structural product ``(S + I)^(degree-1) T_base``.

    Returns a binary n x n_c CSR matrix whose C-rows are empty.
    """
    G = _strength_with_identity(S)
    pattern = binary_pattern(T_base)
    for _ in range(degree - 1):
        pattern = binary_pattern(G @ pattern)
    keep_f = sp.diags((~splitting.is_c).astype(float))
    return binary_pattern(canonicalize(keep_f @ pattern))


def lair_pattern(S, splitting, degree=1):
    """Restriction pattern: F-points within ``degree`` strength hops of each C-point.

    Returns a binary n_c x n CSR matrix with nonzeros only in F columns.
    """
    G = _strength_with_identity(S)
    reach = G[splitting.c_points]
    for _ in range(degree - 1):
        reach = binary_pattern(reach @ G)
    keep_f = sp.diags((~splitting.is_c).astype(float))
    return binary_pattern(canonicalize(reach @ keep_f))


class _PatternLayout:
    """Entry bookkeeping for an n x n_c pattern, grouped for batched local work.

    Entries are numbered in CSR (row-major) order. ``row_groups`` and
    ``col_groups`` map a segment length ``L`` to a ``(g, L)`` array of entry
    numbers, one line per F-row or per coarse column.
    """

    def __init__(self, pattern):
        pattern = binary_pattern(pattern)
        self.shape = pattern.shape
        self.indptr = pattern.indptr
        self.cols = pattern.indices.astype(np.int64)
        self.rows = np.repeat(np.arange(self.shape[0], dtype=np.int64), np.diff(self.indptr))
        self.nnz = len(self.cols)
        self.row_groups = self._groups(self.indptr, np.arange(self.nnz))
        perm = np.argsort(self.cols, kind='stable')
        colptr = np.concatenate(([0], np.cumsum(np.bincount(self.cols, minlength=self.shape[1]))))
        self.col_groups = self._groups(colptr, perm)
        self.empty_rows = np.flatnonzero(np.diff(self.indptr) == 0)

    @staticmethod
    def _groups(ptr, order):
        lengths = np.diff(ptr)
        groups = {}
        for L in np.unique(lengths):
            if L == 0:
                continue
            owners = np.flatnonzero(lengths == L)
            groups[int(L)] = (owners, order[ptr[owners][:, None] + np.arange(L)[None, :]])
        return groups


def _batched_solve(blocks, rhs, diagnostics):
    """Solve a stack of small systems, falling back block by block on trouble."""
    try:
        out = np.linalg.solve(blocks, rhs[..., None])[..., 0]
        if np.all(np.isfinite(out)):
            return out
    except np.linalg.LinAlgError:
        pass
    out = np.empty_like(rhs)
    for t in range(len(blocks)):
        try:
            out[t] = lu_solve(blocks[t], rhs[t])
        except SingularMatrixError:
            diagnostics['singular_local_blocks'] += 1
            out[t] = min_norm_ls(blocks[t], rhs[t])
    return out


def _chunks(owners, entries):
    for s in range(0, len(owners), BATCH):
        yield owners[s:s + BATCH], entries[s:s + BATCH]


def classical_interpolation(A, S, splitting):
    """Ruge-Stuben interpolation with strong-F redistribution.

    For an F-point ``i`` with strong C-neighbors ``C_i``, strong F-neighbors
    ``F_i`` and all remaining off-diagonal couplings treated as weak::

        w_ij = -(a_ij + sum_{k in F_i} a_ik a_kj / sum_{m in C_i} a_km)
               / (a_ii + sum_{weak n} a_in)

    A strong F-neighbor that couples to none of ``C_i`` is lumped into the
    diagonal like a weak connection.
    """
    A = as_csr(A)
    n = A.shape[0]
    is_c = splitting.is_c
    f2c = splitting.fine_to_coarse
    indptr, indices, data = A.indptr, A.indices, A.data
    Sg = S.graph
    rows, cols, vals = [], [], []
    for i in splitting.f_points:
        strong = set(Sg.indices[Sg.indptr[i]:Sg.indptr[i + 1]].tolist())
        ci = [j for j in strong if is_c[j]]
        if not ci:
            raise ValueError(f'F-point {i} has no strong C-neighbor; '
                             'use second-pass Ruge-Stuben coarsening')
        ci_set = set(ci)
        lo, hi = indptr[i], indptr[i + 1]
        diag = 0.0
        num = dict.fromkeys(ci, 0.0)
        for j, a_ij in zip(indices[lo:hi].tolist(), data[lo:hi].tolist()):
            if j == i:
                diag += a_ij
            elif j in ci_set:
                num[j] += a_ij
            elif j in strong:
                klo, khi = indptr[j], indptr[j + 1]
                kc = [(m, a) for m, a in zip(indices[klo:khi].tolist(), data[klo:khi].tolist())
                      if m in ci_set]
                total = sum(a for _, a in kc)
                if total == 0:
                    diag += a_ij
                else:
                    for m, a in kc:
                        num[m] += a_ij * a / total
            else:
                diag += a_ij
        if diag == 0:
            raise ZeroDivisionError(f'vanishing interpolation denominator at F-point {i}')
        for j in sorted(ci):
            rows.append(i)
            cols.append(f2c[j])
            vals.append(-num[j] / diag)
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, splitting.c_count))
    P = canonicalize(W + _injection(splitting))
    return TransferOperator(P, splitting)


def lair_restriction(A, splitting, pattern):
    """lAIR restriction ``R = [Z I]``.

    Row ``i`` of ``Z`` (a C-point) satisfies ``(Z A_ff)_i = -(A_cf)_i`` on the
    F-points of its pattern, which is the transposed local system
    ``A[l, l]^T z = -A[i, l]^T``. C columns of ``pattern`` are ignored.
    """
    A = as_csr(A)
    keys = entry_keys(A)
    pattern = binary_pattern(pattern) @ sp.diags((~splitting.is_c).astype(float))
    lay = _PatternLayout(canonicalize(pattern))
    cpts = splitting.c_points
    z = np.zeros(lay.nnz)
    diag = Counter()
    for L, (owners_all, entries_all) in lay.row_groups.items():
        for owners, entries in _chunks(owners_all, entries_all):
            fdofs = lay.cols[entries]
            blocks = gather_entries(A, fdofs[:, :, None], fdofs[:, None, :], keys)
            rhs = -gather_entries(A, cpts[owners][:, None], fdofs, keys)
            z[entries] = _batched_solve(np.swapaxes(blocks, 1, 2), rhs, diag)
    Z = sp.csr_matrix((z, lay.cols, lay.indptr), shape=lay.shape)
    R = canonicalize(Z + _injection(splitting, shape_rows=False))
    return TransferOperator(R, splitting, diag)


def project_row_updates(delta, M, Mpinv):
    """Remove from each row update its component that changes ``row @ M``.

    ``delta`` is ``(g, L)``, ``M`` the matching ``(g, L, k)`` blocks of ``B_c``
    and ``Mpinv`` their pseudoinverses; afterwards ``delta @ M == 0``.
    """
    return delta - np.einsum('gk,gkl->gl', np.einsum('gl,glk->gk', delta, M), Mpinv)


def clair_transfer(A, S, splitting, cfg, B=None, T_base=None):
    """Constrained lAIR interpolation ``P = [W; I]`` for ``A``.

    Parameters
    ----------
    A : csr_matrix
        Operator (pass ``A.T`` to build a restriction ``R = P(A^T)^T``).
    S : StrengthMatrix
        Strength graph used for the base pattern (FC) and for expanding it.
    splitting : CfSplitting
    cfg : TransferConfig
    B : array, optional
        ``n x k`` constraint vectors, already smoothed. Defaults to ``cfg.B``
        or the constant vector.
    T_base : csr_matrix, optional
        Aggregation operator, required when ``cfg.coarsen_type == 'Agg'``.

    Returns
    -------
    TransferOperator
        ``diagnostics`` counts singular local blocks, F-rows with an empty
        pattern (``unconstrained_rows``) and rows whose pattern is too small
        to reproduce every mode exactly (``infeasible_constraint_rows``).
    """
    A = as_csr(A)
    n = A.shape[0]
    if B is None:
        B = cfg.B if cfg.B is not None else np.ones((n, 1))
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    if cfg.coarsen_type == 'Agg':
        if T_base is None:
            raise ValueError('aggregation coarsening needs the aggregation operator')
        base = T_base
    else:
        base = fc_base_pattern(S, splitting)
    pattern = build_sparsity_pattern(S, base, cfg.degree, splitting)
    lay = _PatternLayout(pattern)
    keys = entry_keys(A)
    cpts = splitting.c_points
    Bc = B[cpts]
    diag = Counter()

    # tentative weights [-A_fc, I] on the expanded pattern
    w = -gather_entries(A, lay.rows, cpts[lay.cols], keys)

    # row-local fit of w B_c = B|_F by minimum-norm updates
    row_blocks = []
    if cfg.constrain:
        empty_f = lay.empty_rows[~splitting.is_c[lay.empty_rows]]
        if len(empty_f):
            diag['unconstrained_rows'] += int(np.count_nonzero(np.abs(B[empty_f]).max(axis=1)))
        for L, (owners_all, entries_all) in lay.row_groups.items():
            for owners, entries in _chunks(owners_all, entries_all):
                M = Bc[lay.cols[entries]]
                Mp = pinv(M)
                dead = np.abs(M).reshape(len(M), -1).max(axis=1) == 0
                diag['zero_constraint_blocks'] += int(dead.sum())
                r = B[owners] - np.einsum('gl,glk->gk', w[entries], M)
                w[entries] += np.einsum('gk,gkl->gl', r, Mp)
                row_blocks.append((entries, M, Mp))

    # local blocks of A_ff per coarse column
    col_blocks = []
    for L, (owners_all, entries_all) in lay.col_groups.items():
        for owners, entries in _chunks(owners_all, entries_all):
            fr = lay.rows[entries]
            blocks = gather_entries(A, fr[:, :, None], fr[:, None, :], keys)
            afc = gather_entries(A, fr, cpts[owners][:, None], keys)
            col_blocks.append((entries, blocks, afc))

    for _ in range(cfg.iterations):
        delta = np.zeros(lay.nnz)
        for entries, blocks, afc in col_blocks:
            res = -afc - np.einsum('gij,gj->gi', blocks, w[entries])
            if cfg.inverse == 'ExactLU':
                delta[entries] = _batched_solve(blocks, res, diag)
            else:
                d = np.diagonal(blocks, axis1=1, axis2=2)
                if np.any(d == 0):
                    raise ZeroDivisionError('zero diagonal in a local A_ff block')
                delta[entries] = res / d
        for entries, M, Mp in row_blocks:
            delta[entries] = project_row_updates(delta[entries], M, Mp)
        w += delta

    # the tentative weights scale like A, so cancellation leaves roundoff of
    # order eps * |A| in the fit; one more exact-arithmetic no-op refit removes it
    for entries, M, Mp in row_blocks:
        target = B[lay.rows[entries[:, 0]]]
        r = target - np.einsum('gl,glk->gk', w[entries], M)
        w[entries] += np.einsum('gk,gkl->gl', r, Mp)
        # rows with fewer pattern entries than independent modes cannot fit exactly
        left = np.abs(target - np.einsum('gl,glk->gk', w[entries], M)).max(axis=1)
        diag['infeasible_constraint_rows'] += int(np.count_nonzero(left > 1e-10))

    W = sp.csr_matrix((w, lay.cols, lay.indptr), shape=lay.shape)
    P = canonicalize(W + _injection(splitting))
    return TransferOperator(P, splitting, diag)


def smooth_constraints(A, B0, steps, splitting, weight=None):
    """Relax ``A b = 0`` from ``B0`` with ``steps`` CFF-Jacobi sweeps.

    Each column is rescaled to unit max-norm afterwards.
    """
    A = as_csr(A)
    B = np.array(B0, dtype=np.float64)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    if steps > 0:
        if weight is None:
            weight = jacobi_weight(A)
        relax = SubsetJacobi(A, splitting.is_c)
        zero = np.zeros(A.shape[0])
        for c in range(B.shape[1]):
            x = B[:, c]
            for _ in range(steps):
                x = relax.cff(x, zero, weight)
            B[:, c] = x
    scale = np.abs(B).max(axis=0)
    scale[scale == 0] = 1.0
    B = B / scale
    return B[:, 0] if squeeze else B
