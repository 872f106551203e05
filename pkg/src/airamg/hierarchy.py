"""Multilevel setup, V(1,1)-cycle and complexity accounting."""
import time
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .partition import CfSplitting, classical_strength, greedy_aggregate, rs_coarsen, symmetric_strength
from .relaxation import RelaxConfig, SubsetJacobi, jacobi_weight
from .sparse import as_csr, filter_small, transpose, triple_product
from .transfer import (TransferConfig, classical_interpolation, clair_transfer, lair_pattern,
                       lair_restriction, smooth_constraints)

__all__ = ['SolverConfig', 'Level', 'Hierarchy', 'setup', 'vcycle', 'operator_complexity',
           'grid_complexity', 'clair_config', 'lair_config', 'classical_config']

METHODS = ('lAIR', 'CLAIR', 'ClassicalRS')


@dataclass(frozen=True)
class SolverConfig:
    """Everything ``setup`` needs.

    The Jacobi weight is re-estimated on every level as ``1/rho(D^{-1}A)``
    unless ``arnoldi_iters=0``, in which case ``relax.weight`` is used.
    ``relax.weighted_postsmoothing=False`` gives the unweighted FFC
    postsmoother of the nonsymmetric setting. ``filter_coarse=None`` filters
    only for lAIR. ``prescale`` is recorded for drivers that apply block
    diagonal scaling before setup.
    """
    method: str = 'CLAIR'
    transfer: TransferConfig = field(default_factory=TransferConfig)
    relax: RelaxConfig = field(default_factory=RelaxConfig)
    coarsen_theta: float = 0.5
    coarsen_strength: str = 'classical'
    second_pass: bool = False
    drop_tol: float = 1e-4
    filter_coarse: Optional[bool] = None
    r_degree: int = 2
    r_theta: float = 0.05
    symmetric: bool = True
    prescale: bool = False
    max_levels: int = 30
    max_coarse: int = 20
    arnoldi_iters: int = 15

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f'method must be one of {METHODS}, got {self.method!r}')
        if self.coarsen_strength not in ('classical', 'symmetric'):
            raise ValueError(f'unknown coarsening strength {self.coarsen_strength!r}')
        if self.arnoldi_iters < 0:
            raise ValueError('arnoldi_iters must be >= 0')
        if self.max_levels < 1 or self.max_coarse < 1:
            raise ValueError('max_levels and max_coarse must be positive')
        if self.r_degree < 1:
            raise ValueError('r_degree must be >= 1')

    @property
    def filtering(self):
        return self.method == 'lAIR' if self.filter_coarse is None else self.filter_coarse

    @property
    def coarsen_type(self):
        return self.transfer.coarsen_type if self.method == 'CLAIR' else 'FC'

    def to_dict(self):
        d = asdict(self)
        B = d['transfer'].pop('B')
        d['transfer']['B'] = None if B is None else np.asarray(B).tolist()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        t = dict(d.pop('transfer', {}))
        if t.get('B') is not None:
            t['B'] = np.asarray(t['B'], dtype=float)
        relax = RelaxConfig(**d.pop('relax', {}))
        return cls(transfer=TransferConfig(**t), relax=relax, **d)


def clair_config(symmetric=True, coarsen_type='Agg', **overrides):
    """CLAIR defaults: SPD (theta 0.5/0.5, ``R = P^T``) or nonsymmetric
    (theta 0.25/0.05, ``R`` from ``A^T``)."""
    if symmetric:
        tc = TransferConfig(coarsen_type=coarsen_type, degree=2, interp_theta=0.5,
                            smoothing_steps=5, build_R_from='PTranspose')
        cfg = SolverConfig('CLAIR', tc, coarsen_theta=0.5, symmetric=True)
    else:
        tc = TransferConfig(coarsen_type=coarsen_type, degree=2, interp_theta=0.05,
                            smoothing_steps=5, build_R_from='TransposeOfA')
        cfg = SolverConfig('CLAIR', tc, RelaxConfig(weighted_postsmoothing=False),
                           coarsen_theta=0.25, symmetric=False, prescale=True)
    if 'transfer' in overrides and not isinstance(overrides['transfer'], TransferConfig):
        overrides['transfer'] = replace(tc, **overrides['transfer'])
    return replace(cfg, **overrides)


def lair_config(symmetric=True, r_degree=2, **overrides):
    """lAIR defaults: RS first pass (second pass when nonsymmetric), classical
    ``P``, lAIR ``R`` with strength 0.05, coarse filtering at 1e-4."""
    cfg = SolverConfig('lAIR', TransferConfig(coarsen_type='FC'),
                       RelaxConfig(weighted_postsmoothing=symmetric), coarsen_theta=0.25,
                       second_pass=not symmetric, r_degree=r_degree, r_theta=0.05,
                       drop_tol=1e-4, symmetric=symmetric, prescale=not symmetric)
    return replace(cfg, **overrides)


def classical_config(**overrides):
    cfg = SolverConfig('ClassicalRS', TransferConfig(coarsen_type='FC'), coarsen_theta=0.25,
                       symmetric=True)
    return replace(cfg, **overrides)


@dataclass
class Level:
    """One level of the hierarchy.

    ``constraint_residual`` is ``max |P B_c - B|``. When ``R`` comes from
    ``A^T`` the analogous residual of ``R^T`` is kept in
    ``r_constraint_residual``; ``r_constrained_residual`` leaves out F rows
    whose pattern is empty (counted as ``unconstrained_rows``).
    """
    A: sp.csr_matrix
    P: Optional[sp.csr_matrix] = None
    R: Optional[sp.csr_matrix] = None
    splitting: Optional[CfSplitting] = None
    relax_weight: float = 1.0
    post_weight: float = 1.0
    B: Optional[np.ndarray] = None
    constraint_residual: Optional[float] = None
    r_constraint_residual: Optional[float] = None
    r_constrained_residual: Optional[float] = None
    diagnostics: Counter = field(default_factory=Counter)
    smoother: Optional[SubsetJacobi] = None


@dataclass
class Hierarchy:
    levels: List[Level]
    config: SolverConfig
    coarse_factor: tuple = None
    setup_time: float = 0.0

    @property
    def n_levels(self):
        return len(self.levels)

    def coarse_solve(self, b):
        if self.coarse_factor is None:
            return np.zeros_like(b)
        return sla.lu_solve(self.coarse_factor, b, check_finite=False)

    def aspreconditioner(self):
        return lambda r: vcycle(self, r)

    def summary(self):
        rows = [{'level': k, 'n': int(L.A.shape[0]), 'nnz': int(L.A.nnz),
                 'relax_weight': float(L.relax_weight),
                 'constraint_residual': L.constraint_residual,
                 'r_constraint_residual': L.r_constraint_residual}
                for k, L in enumerate(self.levels)]
        return {'method': self.config.method, 'levels': rows,
                'operator_complexity': operator_complexity(self),
                'grid_complexity': grid_complexity(self),
                'setup_time': self.setup_time}


def _coarsen_strength(A, cfg):
    if cfg.coarsen_strength == 'symmetric':
        return symmetric_strength(A, cfg.coarsen_theta)
    return classical_strength(A, cfg.coarsen_theta)


def _constraint_residual(P, splitting, B, skip_empty=False):
    res = np.abs(P @ B[splitting.c_points] - B).max(axis=1)
    if skip_empty:
        # F rows with an empty pattern cannot satisfy any constraint
        res = res[(np.diff(P.indptr) > 0) | splitting.is_c]
    return float(res.max(initial=0.0))


def setup(A, cfg=None):
    """Build the multigrid hierarchy for ``A``.

    Coarsening stops at ``max_coarse`` unknowns, ``max_levels`` levels or
    when coarsening stagnates; the last operator is LU-factorized.
    """
    cfg = SolverConfig() if cfg is None else cfg
    t0 = time.perf_counter()
    A = as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError('setup needs a square matrix')
    if np.any(A.diagonal() == 0):
        raise ValueError('setup needs a nonzero diagonal')
    tcfg = cfg.transfer
    n0 = A.shape[0]
    B = np.ones((n0, 1)) if tcfg.B is None else np.asarray(tcfg.B, dtype=float).reshape(n0, -1)
    BT = B.copy()
    levels = []
    while A.shape[0] > cfg.max_coarse and len(levels) + 1 < cfg.max_levels:
        n = A.shape[0]
        S = _coarsen_strength(A, cfg)
        AggOp = None
        if cfg.coarsen_type == 'Agg':
            AggOp, splitting = greedy_aggregate(S)
        else:
            splitting = rs_coarsen(S, cfg.second_pass)
        if splitting.c_count in (0, n):
            break
        weight = jacobi_weight(A, cfg.arnoldi_iters) if cfg.arnoldi_iters else cfg.relax.weight
        level = Level(A, splitting=splitting, relax_weight=weight,
                      post_weight=weight if cfg.relax.weighted_postsmoothing else 1.0)

        if cfg.method == 'CLAIR':
            Bs = smooth_constraints(A, B, tcfg.smoothing_steps, splitting, weight)
            S_int = classical_strength(A, tcfg.interp_theta)
            Pop = clair_transfer(A, S_int, splitting, tcfg, Bs, AggOp)
            P = Pop.matrix
            level.diagnostics.update(Pop.diagnostics)
            level.B = Bs
            level.constraint_residual = _constraint_residual(P, splitting, Bs)
            if tcfg.build_R_from == 'PTranspose':
                R = transpose(P)
            else:
                AT = transpose(A)
                wT = jacobi_weight(AT, cfg.arnoldi_iters) if cfg.arnoldi_iters else weight
                BTs = smooth_constraints(AT, BT, tcfg.smoothing_steps, splitting, wT)
                Rop = clair_transfer(AT, classical_strength(AT, tcfg.interp_theta),
                                     splitting, tcfg, BTs, AggOp)
                level.diagnostics.update(Rop.diagnostics)
                R = transpose(Rop.matrix)
                level.r_constraint_residual = _constraint_residual(Rop.matrix, splitting, BTs)
                level.r_constrained_residual = _constraint_residual(Rop.matrix, splitting, BTs,
                                                                    skip_empty=True)
                BT = BTs[splitting.c_points]
            B = Bs[splitting.c_points]
        else:
            P = classical_interpolation(A, S, splitting).matrix
            if cfg.method == 'lAIR':
                pattern = lair_pattern(classical_strength(A, cfg.r_theta), splitting, cfg.r_degree)
                Rop = lair_restriction(A, splitting, pattern)
                level.diagnostics.update(Rop.diagnostics)
                R = Rop.matrix
            else:
                R = transpose(P)

        level.P, level.R = P, R
        level.smoother = SubsetJacobi(A, splitting.is_c)
        levels.append(level)
        Ac = triple_product(R, A, P)
        if cfg.filtering:
            Ac = filter_small(Ac, cfg.drop_tol)
        A = Ac

    levels.append(Level(A))
    scale = np.abs(levels[0].A.data).max()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', sla.LinAlgWarning)
            factor = sla.lu_factor(A.toarray(), check_finite=False)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise np.linalg.LinAlgError('coarsest operator could not be factorized') from exc
    if np.abs(np.diag(factor[0])).min() <= 1e-14 * scale:
        raise np.linalg.LinAlgError('coarsest operator is singular')
    H = Hierarchy(levels, cfg, factor)
    H.setup_time = time.perf_counter() - t0
    return H


def _cycle(H, k, b, x):
    L = H.levels[k]
    if k == H.n_levels - 1:
        return H.coarse_solve(b)
    x = L.smoother.cff(x, b, L.relax_weight)
    r = b - L.A @ x
    ec = _cycle(H, k + 1, L.R @ r, np.zeros(L.R.shape[0]))
    x = x + L.P @ ec
    return L.smoother.ffc(x, b, L.post_weight)


def vcycle(H, b, x0=None):
    """One V(1,1)-cycle: CFF presmoothing, coarse correction, FFC postsmoothing."""
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    return _cycle(H, 0, b, x)


def operator_complexity(H):
    return sum(L.A.nnz for L in H.levels) / H.levels[0].A.nnz


def grid_complexity(H):
    return sum(L.A.shape[0] for L in H.levels) / H.levels[0].A.shape[0]
