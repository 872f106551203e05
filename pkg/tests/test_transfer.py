import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from airamg.partition import CfSplitting, classical_strength, greedy_aggregate, rs_coarsen
from airamg.problems import advdiff_upwind_2d, poisson_1d, poisson_2d
from airamg.relaxation import jacobi_weight
from airamg.transfer import (TransferConfig, build_sparsity_pattern, classical_interpolation,
                             clair_transfer, fc_base_pattern, lair_pattern, lair_restriction,
                             project_row_updates, smooth_constraints)

from conftest import full_strength, random_spd, random_splitting, random_upwind

UNCONSTRAINED = TransferConfig(coarsen_type='FC', degree=1, constrain=False)


def blocks(A, s):
    A = A.toarray()
    C, F = s.c_points, s.f_points
    return A[np.ix_(F, F)], A[np.ix_(F, C)], A[np.ix_(C, F)], A[np.ix_(C, C)]


def full_f_pattern(s):
    return sp.csr_matrix(np.tile((~s.is_c).astype(float), (s.c_count, 1)))


def test_classical_interpolation_1d():
    A = poisson_1d(7)
    s = CfSplitting(np.arange(7) % 2 == 1)
    P = classical_interpolation(A, classical_strength(A, 0.25), s).matrix.toarray()
    assert_allclose(P[2], [0.5, 0.5, 0])
    assert_allclose(P[0], [0.5, 0, 0])
    assert_array_equal(P[s.c_points], np.eye(3))


def test_classical_interpolation_all_c():
    A = poisson_1d(4)
    s = CfSplitting(np.ones(4, dtype=bool))
    P = classical_interpolation(A, classical_strength(A, 0.25), s).matrix
    assert_array_equal(P.toarray(), np.eye(4))


def test_classical_interpolation_interior_row_sums():
    A = poisson_2d(12)
    S = classical_strength(A, 0.25)
    s = rs_coarsen(S)
    P = classical_interpolation(A, S, s).matrix
    rowsum = np.asarray(P.sum(axis=1)).ravel()
    interior = np.abs(np.asarray(A.sum(axis=1)).ravel()) < 1e-12
    assert_allclose(rowsum[interior], 1.0, atol=1e-13)


def test_classical_interpolation_needs_strong_c():
    A = poisson_1d(5)
    s = CfSplitting(np.array([1, 0, 0, 0, 1], dtype=bool))
    with pytest.raises(ValueError, match='second-pass'):
        classical_interpolation(A, classical_strength(A, 0.25), s)


def test_pattern_degree_one_fc_and_agg():
    A = poisson_2d(8)
    S = classical_strength(A, 0.25)
    s = rs_coarsen(S)
    pat = build_sparsity_pattern(S, fc_base_pattern(S, s), 1, s).toarray()
    G = (S.graph.toarray() != 0)
    assert_array_equal(pat[s.f_points] != 0, G[np.ix_(s.f_points, s.c_points)])
    assert not pat[s.c_points].any()
    Agg, sa = greedy_aggregate(classical_strength(A, 0.5))
    pat = build_sparsity_pattern(S, Agg, 1, sa).toarray()
    want = Agg.toarray() != 0
    want[sa.c_points] = False
    assert_array_equal(pat != 0, want)


def test_pattern_degree_two_dense_oracle():
    A = poisson_1d(9)
    S = classical_strength(A, 0.25)
    Agg, s = greedy_aggregate(S)
    pat = build_sparsity_pattern(S, Agg, 2, s).toarray() != 0
    G = (S.graph.toarray() != 0) | np.eye(9, dtype=bool)
    want = (G.astype(int) @ (Agg.toarray() != 0).astype(int)) > 0
    want[s.c_points] = False
    assert_array_equal(pat, want)
    # aggregate {2,3,4} (root 3) grows by one hop on each side
    assert_array_equal(np.flatnonzero(pat[:, 1]), [1, 2, 4, 5])


def test_lair_single_f_pattern():
    A = poisson_1d(5)
    s = CfSplitting(np.array([0, 1, 0, 0, 0], dtype=bool))
    pat = sp.csr_matrix(([1.0], ([0], [2])), shape=(1, 5))
    R = lair_restriction(A, s, pat).matrix.toarray()
    assert R[0, 2] == pytest.approx(-A[1, 2] / A[2, 2])
    assert R[0, 1] == 1.0
    assert np.count_nonzero(R) == 2


def test_lair_pattern_hops():
    A = poisson_1d(9)
    S = classical_strength(A, 0.25)
    s = CfSplitting(np.arange(9) % 4 == 0)
    assert_array_equal(lair_pattern(S, s, 1).toarray()[1].nonzero()[0], [3, 5])
    assert_array_equal(lair_pattern(S, s, 2).toarray()[1].nonzero()[0], [2, 3, 5, 6])


@pytest.mark.parametrize('make', [random_spd, random_upwind])
def test_ideal_restriction_and_interpolation(make, rng):
    n = 40
    A = make(n, rng)
    s = random_splitting(n, rng)
    Aff, Afc, Acf, Acc = blocks(A, s)
    R = lair_restriction(A, s, full_f_pattern(s)).matrix.toarray()
    assert_allclose(R[:, s.f_points], -Acf @ np.linalg.inv(Aff), atol=1e-12)
    P = clair_transfer(A, full_strength(n), s, UNCONSTRAINED).matrix.toarray()
    assert_allclose(P[s.f_points], -np.linalg.solve(Aff, Afc), atol=1e-12)
    # A P has zero F-rows and R A has zero F-columns
    assert np.abs((A @ P)[s.f_points]).max() <= 1e-10 * np.abs(A).max()
    assert np.abs((R @ A)[:, s.f_points]).max() <= 1e-10 * np.abs(A).max()


def test_lower_triangular_local_patterns_annihilate():
    rng = np.random.default_rng(7)
    A = random_upwind(30, rng, density=0.2)
    s = random_splitting(30, rng)
    R = lair_restriction(A, s, full_f_pattern(s)).matrix
    assert np.abs((R @ A).toarray()[:, s.f_points]).max() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(4, 60), degree=st.integers(1, 3),
       kind=st.sampled_from(['spd', 'upwind']))
def test_remark_one_equivalence(seed, n, degree, kind):
    """Constraints off, ExactLU, one iteration: each W column solves its local F block."""
    rng = np.random.default_rng(seed)
    A = (random_spd if kind == 'spd' else random_upwind)(n, rng, density=0.2)
    s = random_splitting(n, rng)
    S = classical_strength(A, 0.25)
    cfg = TransferConfig(coarsen_type='FC', degree=degree, constrain=False)
    P = clair_transfer(A, S, s, cfg).matrix.toarray()
    pat = build_sparsity_pattern(S, fc_base_pattern(S, s), degree, s).toarray() != 0
    Ad = A.toarray()
    for j, c in enumerate(s.c_points):
        rows = np.flatnonzero(pat[:, j])
        want = np.zeros(n)
        if len(rows):
            want[rows] = -np.linalg.solve(Ad[np.ix_(rows, rows)], Ad[rows, c])
        want[s.c_points] = 0
        got = P[:, j].copy()
        got[s.c_points] = 0
        assert np.abs(got - want).max() <= 1e-10
        assert not np.any(P[~pat[:, j] & ~s.is_c, j])   # pattern containment


def test_constraints_hold_and_c_rows_are_injection():
    A = poisson_2d(16)
    S = classical_strength(A, 0.5)
    Agg, s = greedy_aggregate(S)
    B = smooth_constraints(A, np.ones(256), 5, s)
    for it in (1, 2, 3):
        op = clair_transfer(A, S, s, TransferConfig(degree=2, iterations=it), B, Agg)
        P = op.matrix
        assert np.abs(P @ B[s.c_points] - B).max() <= 1e-10
        assert_array_equal(P[s.c_points].toarray(), np.eye(s.c_count))
        assert op.diagnostics['zero_constraint_blocks'] == 0
        assert op.diagnostics['infeasible_constraint_rows'] == 0


def test_two_modes_exact_except_on_short_rows():
    A = poisson_2d(16)
    S = classical_strength(A, 0.5)
    Agg, s = greedy_aggregate(S)
    rng = np.random.default_rng(3)
    B = smooth_constraints(A, np.column_stack([np.ones(256), rng.random(256)]), 5, s)
    op = clair_transfer(A, S, s, TransferConfig(degree=2), B, Agg)
    P = op.matrix
    err = np.abs(P @ B[s.c_points] - B).max(axis=1)
    short = np.diff(P.indptr) == 1
    short[s.c_points] = False
    assert err[~short].max() <= 1e-10
    assert op.diagnostics['infeasible_constraint_rows'] == np.count_nonzero(err > 1e-10)
    assert np.all(err[err > 1e-10] > 0) and short[err > 1e-10].all()


def test_diagonal_inverse_option():
    A = poisson_2d(10)
    S = classical_strength(A, 0.5)
    Agg, s = greedy_aggregate(S)
    B = smooth_constraints(A, np.ones(100), 5, s)
    P = clair_transfer(A, S, s, TransferConfig(inverse='Diagonal'), B, Agg).matrix
    assert np.abs(P @ B[s.c_points] - B).max() <= 1e-10


def test_clair_remark_two_default_iterations():
    A = poisson_2d(10)
    S = classical_strength(A, 0.5)
    Agg, s = greedy_aggregate(S)
    B = smooth_constraints(A, np.ones(100), 5, s)
    P1 = clair_transfer(A, S, s, TransferConfig(iterations=1), B, Agg).matrix.toarray()
    P2 = clair_transfer(A, S, s, TransferConfig(iterations=2), B, Agg).matrix.toarray()
    assert_allclose(P1, P2, atol=1e-12)


def test_projection_idempotent_and_orthogonal(rng):
    M = rng.standard_normal((6, 4, 2))
    Mp = np.linalg.pinv(M)
    d = rng.standard_normal((6, 4))
    once = project_row_updates(d, M, Mp)
    assert_allclose(project_row_updates(once, M, Mp), once, atol=1e-14)
    assert_allclose(np.einsum('gl,glk->gk', once, M), 0, atol=1e-13)


def test_missing_constraint_block_counted():
    # a strength graph without edges leaves the F-rows of an FC pattern empty
    A = poisson_1d(5)
    s = CfSplitting(np.array([0, 1, 0, 1, 0], dtype=bool))
    S = classical_strength(sp.identity(5, format='csr'), 0.25)
    op = clair_transfer(A, S, s, TransferConfig(coarsen_type='FC'), np.ones(5))
    assert op.diagnostics['unconstrained_rows'] == 3
    assert_array_equal(op.matrix.toarray()[s.f_points], 0)


def test_agg_requires_operator():
    A = poisson_1d(5)
    with pytest.raises(ValueError):
        clair_transfer(A, classical_strength(A, 0.25), CfSplitting(np.arange(5) == 2),
                       TransferConfig(coarsen_type='Agg'))


def test_transposed_restriction_for_nonsymmetric():
    A = advdiff_upwind_2d(12, 1.0)
    S = classical_strength(A, 0.25)
    Agg, s = greedy_aggregate(S)
    AT = A.T.tocsr()
    B = smooth_constraints(AT, np.ones(A.shape[0]), 5, s)
    Pt = clair_transfer(AT, classical_strength(AT, 0.05), s, TransferConfig(interp_theta=0.05),
                        B, Agg).matrix
    R = Pt.T
    assert np.abs(B[s.c_points] @ R - B).max() <= 1e-10


def test_smooth_constraints_zero_steps_normalizes():
    B0 = np.array([[2.0, -1.0], [4.0, 0.5], [1.0, 0.25]])
    out = smooth_constraints(poisson_1d(3), B0, 0, CfSplitting(np.array([0, 1, 0], dtype=bool)))
    assert_allclose(out, B0 / [4.0, 1.0])


def test_smooth_constraints_1d_hand_iteration():
    # n=5, C = {1, 3}, omega = 1/rho(D^{-1}A) = 1/(1 + cos(pi/6))
    A = poisson_1d(5, scale=False)
    s = CfSplitting(np.array([0, 1, 0, 1, 0], dtype=bool))
    w = 1 / (1 + np.cos(np.pi / 6))
    x = np.ones(5)
    for _ in range(2):
        for pts in ([1, 3], [0, 2, 4], [0, 2, 4]):
            y = x.copy()
            for i in pts:
                left = x[i - 1] if i > 0 else 0.0
                right = x[i + 1] if i < 4 else 0.0
                y[i] = x[i] + w * (left + right - 2 * x[i]) / 2
            x = y
    got = smooth_constraints(A, np.ones(5), 2, s, w)
    assert_allclose(got, x / np.abs(x).max(), rtol=1e-14)
    assert jacobi_weight(A) == pytest.approx(w, rel=1e-10)
    # interior rows with zero row sum keep the constant locally; boundaries shrink
    assert got[2] == pytest.approx(1.0)
    assert got[0] < got[2]


def test_config_validation():
    with pytest.raises(ValueError):
        TransferConfig(coarsen_type='XX')
    with pytest.raises(ValueError):
        TransferConfig(B=np.zeros((4, 1)))
    with pytest.raises(ValueError):
        TransferConfig(degree=0)
    assert TransferConfig(B=np.ones(3)).B.shape == (3, 1)
