import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from airamg.relaxation import (RelaxConfig, SubsetJacobi, cff_sweep, ffc_sweep, jacobi_sweep,
                               jacobi_weight)
from airamg.problems import poisson_1d

from conftest import random_general


def loop_jacobi(A, x, b, w, idx):
    A = A.toarray()
    x = np.array(x, dtype=float)
    new = x.copy()
    for i in idx:
        new[i] = x[i] + w * (b[i] - A[i] @ x) / A[i, i]
    return new


def test_jacobi_hand_example():
    A = poisson_1d(3, scale=False)
    x = jacobi_sweep(A, np.zeros(3), np.array([1.0, 0, 1]), 1.0)
    assert_array_equal(x, [0.5, 0, 0.5])
    x = jacobi_sweep(A, np.ones(3), np.zeros(3), 0.5, subset=np.array([True, False, False]))
    assert_array_equal(x, [0.75, 1, 1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 30), w=st.floats(0.1, 1.5))
def test_subset_sweep_matches_loops_and_leaves_rest_alone(seed, n, w):
    rng = np.random.default_rng(seed)
    A = random_general(n, rng)
    x, b = rng.standard_normal(n), rng.standard_normal(n)
    mask = rng.random(n) < 0.5
    y = jacobi_sweep(A, x, b, w, mask)
    assert_array_equal(y[~mask], x[~mask])     # bit-identical outside the subset
    assert_allclose(y, loop_jacobi(A, x, b, w, np.flatnonzero(mask)), rtol=1e-13, atol=1e-13)


def test_cff_and_ffc_orderings(rng):
    A = random_general(12, rng)
    is_c = rng.random(12) < 0.4
    x, b = rng.standard_normal(12), rng.standard_normal(12)
    C, F = np.flatnonzero(is_c), np.flatnonzero(~is_c)
    ref = loop_jacobi(A, loop_jacobi(A, loop_jacobi(A, x, b, 0.7, C), b, 0.7, F), b, 0.7, F)
    assert_allclose(cff_sweep(A, x, b, is_c, 0.7), ref, rtol=1e-13)
    ref = loop_jacobi(A, loop_jacobi(A, loop_jacobi(A, x, b, 0.7, F), b, 0.7, F), b, 0.7, C)
    assert_allclose(ffc_sweep(A, x, b, is_c, 0.7), ref, rtol=1e-13)
    x0 = x.copy()
    SubsetJacobi(A, is_c).cff(x, b, 0.7)
    assert_array_equal(x, x0)                    # input not modified


def test_jacobi_weight_1d_poisson():
    # D^{-1}A = tridiag(-1/2, 1, -1/2) has rho = 1 + cos(pi/(n+1))
    n = 5
    assert jacobi_weight(poisson_1d(n)) == pytest.approx(1 / (1 + np.cos(np.pi / (n + 1))), rel=1e-10)


def test_zero_diagonal_errors():
    A = poisson_1d(3, scale=False).tolil()
    A[1, 1] = 0
    A = A.tocsr()
    with pytest.raises(ZeroDivisionError):
        jacobi_sweep(A, np.zeros(3), np.ones(3), 1.0)
    # subsets that avoid the zero diagonal still work
    jacobi_sweep(A, np.zeros(3), np.ones(3), 1.0, subset=np.array([0, 2]))
    with pytest.raises(ValueError):
        jacobi_weight(A)


def test_relax_config_validation():
    with pytest.raises(ValueError):
        RelaxConfig(weight=0.0)
    with pytest.raises(ValueError):
        RelaxConfig(pattern='XYZ')
    assert RelaxConfig().pattern == 'CFF'
