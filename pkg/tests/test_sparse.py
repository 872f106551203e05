import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from airamg.problems import poisson_1d
from airamg.sparse import (as_csr, canonicalize, extract_submatrix, filter_small, gather_entries,
                           is_canonical, matmul, mmread, mmwrite, spmv, transpose,
                           triple_product)


def tridiag(n):
    return poisson_1d(n, scale=False)


def random_sparse(rng, m, n, density=0.4):
    return canonicalize(sp.random(m, n, density=density, random_state=rng.integers(1 << 30)))


def assert_canonical(A):
    assert sp.isspmatrix_csr(A)
    assert A.dtype == np.float64
    assert A.indptr[0] == 0 and A.indptr[-1] == len(A.data) == len(A.indices)
    assert np.all(np.diff(A.indptr) >= 0)
    assert is_canonical(A)


def test_canonicalize_sums_duplicates_and_drops_zeros():
    A = sp.csr_matrix((np.array([1.0, 2.0, 0.0, 3.0]), np.array([2, 2, 0, 1]),
                       np.array([0, 3, 4])), shape=(2, 3))
    C = canonicalize(A)
    assert_canonical(C)
    assert_array_equal(C.toarray(), [[0, 0, 3], [0, 3, 0]])
    assert C.nnz == 2
    assert canonicalize(A, keep_zeros=True).nnz == 3


def test_spmv_examples():
    assert_array_equal(spmv(sp.identity(3, format='csr'), [1, 2, 3]), [1, 2, 3])
    assert_array_equal(spmv(tridiag(3), np.ones(3)), [1, 0, 1])
    with pytest.raises(ValueError, match='mismatch'):
        spmv(tridiag(3), np.ones(4))


def test_spmv_dense_oracle(rng):
    A = random_sparse(rng, 5, 5)
    x = rng.standard_normal(5)
    assert_allclose(spmv(A, x), A.toarray() @ x, atol=1e-14)


def test_transpose_examples(rng):
    I = as_csr(sp.identity(4))
    assert_array_equal(transpose(I).toarray(), np.eye(4))
    A = canonicalize(sp.csr_matrix(([5.0], ([0], [2])), shape=(2, 3)))
    T = transpose(A)
    assert T.shape == (3, 2) and T[2, 0] == 5 and T.nnz == 1
    assert_canonical(T)


def test_triple_product_dense_oracle(rng):
    A = random_sparse(rng, 6, 6)
    R = random_sparse(rng, 3, 6)
    P = random_sparse(rng, 6, 3)
    C = triple_product(R, A, P)
    assert_canonical(C)
    assert_allclose(C.toarray(), R.toarray() @ A.toarray() @ P.toarray(), atol=1e-13)
    I = as_csr(sp.identity(6))
    assert_allclose(triple_product(I, A, I).toarray(), A.toarray())
    with pytest.raises(ValueError):
        triple_product(P, A, P)


def test_triple_product_ideal_schur_1d():
    # C = {1, 3} on the 5-point chain; the Schur complement is tridiag(-1/2, 1, -1/2)
    A = tridiag(5).toarray()
    C, F = [1, 3], [0, 2, 4]
    Z = -A[np.ix_(C, F)] @ np.linalg.inv(A[np.ix_(F, F)])
    W = -np.linalg.solve(A[np.ix_(F, F)], A[np.ix_(F, C)])
    R = np.zeros((2, 5))
    R[:, F], R[:, C] = Z, np.eye(2)
    P = np.zeros((5, 2))
    P[F], P[C] = W, np.eye(2)
    Ac = triple_product(sp.csr_matrix(R), tridiag(5), sp.csr_matrix(P)).toarray()
    assert_allclose(Ac, [[1, -0.5], [-0.5, 1]], atol=1e-15)


def test_matmul_associative(rng):
    A, B, C = (random_sparse(rng, 12, 12) for _ in range(3))
    left = matmul(matmul(A, B), C).toarray()
    right = matmul(A, matmul(B, C)).toarray()
    assert_allclose(left, right, atol=1e-12)
    assert_allclose(left, A.toarray() @ B.toarray() @ C.toarray(), atol=1e-12)
    with pytest.raises(ValueError):
        matmul(random_sparse(rng, 2, 3), random_sparse(rng, 2, 3))


def test_extract_submatrix_examples():
    A = tridiag(3)
    assert_array_equal(extract_submatrix(A, [0, 1, 2], [0, 1, 2]), A.toarray())
    assert_array_equal(extract_submatrix(tridiag(5), [1], [1]), [[2]])
    assert_array_equal(extract_submatrix(A, [0, 2], [1]), [[-1], [-1]])
    with pytest.raises(IndexError):
        extract_submatrix(A, [3], [0])


def test_gather_entries_missing_are_zero():
    A = tridiag(4)
    out = gather_entries(A, np.array([[0, 0], [3, 1]]), np.array([[0, 3], [2, 1]]))
    assert_array_equal(out, [[2, 0], [-1, 2]])
    assert gather_entries(A, np.zeros(0, int), np.zeros(0, int)).shape == (0,)


def test_filter_small_examples():
    A = canonicalize(sp.csr_matrix(np.array([[4.0, 1e-6, 1.0], [1.0, 4.0, 0.0], [0, 1e-6, 1e-9]])))
    F = filter_small(A, 1e-4)
    assert F[0, 1] == 0 and F[0, 2] == 1.0
    assert F[0, 0] == 4.0            # no lumping
    assert F[2, 2] == 1e-9           # diagonal kept however small
    assert F[2, 1] == 1e-6           # the only off-diagonal is its own row max
    assert_array_equal(filter_small(A, 0.0).toarray(), A.toarray())
    with pytest.raises(ValueError):
        filter_small(A, -1.0)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), tol=st.floats(0, 1), n=st.integers(1, 15))
def test_filter_never_adds_entries(seed, tol, n):
    rng = np.random.default_rng(seed)
    A = random_sparse(rng, n, n, 0.5)
    F = filter_small(A, tol)
    assert_canonical(F)
    assert F.nnz <= A.nnz
    kept = F.toarray() != 0
    assert_array_equal(F.toarray()[kept], A.toarray()[kept])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 12), n=st.integers(1, 12))
def test_transpose_involution_and_canonical(seed, m, n):
    A = random_sparse(np.random.default_rng(seed), m, n)
    T = transpose(A)
    assert_canonical(T)
    assert (transpose(T) != A).nnz == 0


def test_matrix_market_round_trip(tmp_path, rng):
    A = random_sparse(rng, 7, 5)
    A.data *= np.pi
    path = tmp_path / 'a.mtx'
    mmwrite(path, A)
    B = mmread(path)
    assert_canonical(B)
    assert_array_equal(B.toarray(), A.toarray())
