"""Strength of connection, C/F splittings and root-node aggregation."""
import heapq
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .sparse import as_csr, canonicalize

__all__ = ['StrengthMatrix', 'CfSplitting', 'classical_strength', 'symmetric_strength',
           'rs_coarsen', 'greedy_aggregate']

F_PT, C_PT, UNDECIDED = 0, 1, -1


@dataclass(frozen=True)
class StrengthMatrix:
    """Strong couplings of a matrix.

    ``graph[i, j] != 0`` means row ``i`` depends strongly on ``j``; stored
    values are ``|a_ij|``. The diagonal is never stored.
    """
    graph: sp.csr_matrix
    theta: float

    @property
    def shape(self):
        return self.graph.shape

    def neighbors(self, i):
        g = self.graph
        return g.indices[g.indptr[i]:g.indptr[i + 1]]


@dataclass(frozen=True)
class CfSplitting:
    """Partition of the unknowns into C-points and F-points.

    ``aggregate_of[i]`` is the aggregate (equivalently, coarse index of the
    root C-point) that owns dof ``i`` when the splitting came from aggregation.
    """
    is_c: np.ndarray
    aggregate_of: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, 'is_c', np.asarray(self.is_c, dtype=bool))

    @property
    def n(self):
        return len(self.is_c)

    @property
    def labels(self):
        return self.is_c.astype(np.int8)

    @property
    def c_points(self):
        return np.flatnonzero(self.is_c)

    @property
    def f_points(self):
        return np.flatnonzero(~self.is_c)

    @property
    def c_count(self):
        return int(self.is_c.sum())

    @property
    def f_count(self):
        return self.n - self.c_count

    @property
    def fine_to_coarse(self):
        """Coarse index of every C-point, ``-1`` at F-points."""
        out = np.full(self.n, -1, dtype=np.int64)
        out[self.is_c] = np.arange(self.c_count)
        return out

    def check(self):
        """Assert the partition invariants; returns ``self`` for chaining."""
        assert self.c_count + self.f_count == self.n
        if self.aggregate_of is not None:
            agg = np.asarray(self.aggregate_of)
            assert agg.shape == (self.n,)
            assert agg.min() >= 0 and agg.max() == self.c_count - 1
            # one root per aggregate, and that root owns coarse index = aggregate id
            assert np.array_equal(np.sort(agg[self.is_c]), np.arange(self.c_count))
            assert np.array_equal(agg[self.is_c], np.arange(self.c_count))
        return self

    def to_json(self):
        data = {'labels': self.labels.tolist()}
        if self.aggregate_of is not None:
            data['aggregate_of'] = np.asarray(self.aggregate_of).tolist()
        return json.dumps(data)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        agg = data.get('aggregate_of')
        return cls(np.array(data['labels'], dtype=bool),
                   None if agg is None else np.array(agg, dtype=np.int64))


def _offdiag(A):
    A = as_csr(A)
    rows = np.repeat(np.arange(A.shape[0]), np.diff(A.indptr))
    return A, rows, rows != A.indices


def _build(A, rows, keep, theta):
    g = sp.csr_matrix((np.abs(A.data[keep]), A.indices[keep], np.concatenate(
        ([0], np.cumsum(np.bincount(rows[keep], minlength=A.shape[0]))))), shape=A.shape)
    return StrengthMatrix(canonicalize(g), float(theta))


def classical_strength(A, theta=0.25):
    """Ruge-Stuben strength: ``-a_ij >= theta * max_{k != i}(-a_ik)``.

    Rows without a negative off-diagonal fall back to magnitudes,
    ``|a_ij| >= theta * max_{k != i} |a_ik|``.
    """
    if not 0 <= theta <= 1:
        raise ValueError('theta must lie in [0, 1]')
    A, rows, off = _offdiag(A)
    n = A.shape[0]
    neg = np.where(off, -A.data, 0.0)
    mag = np.where(off, np.abs(A.data), 0.0)
    negmax = np.zeros(n)
    np.maximum.at(negmax, rows, neg)
    magmax = np.zeros(n)
    np.maximum.at(magmax, rows, mag)
    has_neg = negmax[rows] > 0
    keep = np.where(has_neg, (neg > 0) & (neg >= theta * negmax[rows]),
                    (mag > 0) & (mag >= theta * magmax[rows]))
    return _build(A, rows, keep & off, theta)


def symmetric_strength(A, theta=0.0):
    """Smoothed-aggregation strength: ``|a_ij| >= theta * sqrt(|a_ii a_jj|)``."""
    if not 0 <= theta <= 1:
        raise ValueError('theta must lie in [0, 1]')
    A, rows, off = _offdiag(A)
    d = np.abs(A.diagonal())
    if np.any(d == 0):
        raise ValueError(f'zero diagonal at row {int(np.flatnonzero(d == 0)[0])}')
    mag = np.abs(A.data)
    keep = off & (mag > 0) & (mag >= theta * np.sqrt(d[rows] * d[A.indices]))
    return _build(A, rows, keep, theta)


def rs_coarsen(S, second_pass=False):
    """Ruge-Stuben C/F splitting.

    First pass: repeatedly promote the undecided point with the largest
    measure (number of undecided-or-F points that depend strongly on it;
    ties go to the lowest index) to C and its strong dependents to F.
    Points left undecided once every measure is zero become C.
    The optional second pass makes extra C-points so that strongly coupled
    F-points share a strong C-neighbor.
    """
    G = S.graph
    GT = canonicalize(G.T)
    n = G.shape[0]
    state = np.full(n, UNDECIDED, dtype=np.int8)
    lam = np.diff(GT.indptr).astype(np.int64)
    indptr, indices = G.indptr, G.indices
    tptr, tind = GT.indptr, GT.indices

    heap = [(-int(lam[i]), i) for i in range(n)]
    heapq.heapify(heap)
    while heap:
        negl, i = heapq.heappop(heap)
        if state[i] != UNDECIDED or -negl != lam[i]:
            continue
        if lam[i] == 0:
            break
        state[i] = C_PT
        for j in tind[tptr[i]:tptr[i + 1]]:
            if state[j] != UNDECIDED:
                continue
            state[j] = F_PT
            for k in indices[indptr[j]:indptr[j + 1]]:
                if state[k] == UNDECIDED:
                    lam[k] += 1
                    heapq.heappush(heap, (-int(lam[k]), int(k)))
        for j in indices[indptr[i]:indptr[i + 1]]:
            if state[j] == UNDECIDED:
                lam[j] -= 1
                heapq.heappush(heap, (-int(lam[j]), int(j)))
    state[state == UNDECIDED] = C_PT

    if second_pass:
        for i in np.flatnonzero(state == F_PT):
            if state[i] != F_PT:
                continue
            nbrs = indices[indptr[i]:indptr[i + 1]]
            ci = set(int(k) for k in nbrs if state[k] == C_PT)
            tentative = -1
            for j in nbrs:
                if state[j] != F_PT:
                    continue
                cj = indices[indptr[j]:indptr[j + 1]]
                if any(int(k) in ci for k in cj if state[k] == C_PT):
                    continue
                if tentative >= 0:
                    state[tentative] = F_PT
                    state[i] = C_PT
                    break
                tentative = int(j)
                state[j] = C_PT
                ci.add(tentative)
    return CfSplitting(state == C_PT)


def greedy_aggregate(S):
    """Root-node aggregation on the symmetrized strength graph.

    Returns
    -------
    AggOp : csr_matrix
        ``n x n_agg`` binary aggregation operator.
    splitting : CfSplitting
        Roots (aggregate seeds) are the C-points.
    """
    G = S.graph
    W = canonicalize(G.maximum(G.T))
    n = W.shape[0]
    indptr, indices, data = W.indptr, W.indices, W.data
    agg = np.full(n, -1, dtype=np.int64)
    roots = []

    # phase 1: seed an aggregate at every dof whose closed neighborhood is unmarked
    for i in range(n):
        if agg[i] >= 0:
            continue
        nbrs = indices[indptr[i]:indptr[i + 1]]
        if np.all(agg[nbrs] < 0):
            agg[i] = len(roots)
            agg[nbrs] = len(roots)
            roots.append(i)
    phase1 = agg.copy()

    # phase 2: attach leftovers to the phase-1 aggregate of their strongest neighbor
    for i in np.flatnonzero(agg < 0):
        lo, hi = indptr[i], indptr[i + 1]
        owners = phase1[indices[lo:hi]]
        ok = owners >= 0
        if not ok.any():
            continue
        w = data[lo:hi][ok]
        cand = owners[ok][w == w.max()]
        agg[i] = cand.min()

    for i in np.flatnonzero(agg < 0):
        agg[i] = len(roots)
        roots.append(i)

    # number aggregates by ascending root so coarse index order matches C-point order
    roots = np.asarray(roots, dtype=np.int64)
    order = np.argsort(roots, kind='stable')
    relabel = np.empty_like(order)
    relabel[order] = np.arange(len(order))
    agg = relabel[agg]
    is_c = np.zeros(n, dtype=bool)
    is_c[roots] = True
    AggOp = sp.csr_matrix((np.ones(n), agg, np.arange(n + 1)), shape=(n, len(roots)))
    return canonicalize(AggOp), CfSplitting(is_c, agg)
