"""Reduction-based algebraic multigrid: lAIR, constrained lAIR and friends."""
from . import _threads  # noqa: F401  (must precede numpy)
from .hierarchy import (Hierarchy, Level, SolverConfig, classical_config, clair_config,
                        grid_complexity, lair_config, operator_complexity, setup, vcycle)
from .krylov import ConvergenceReport, KrylovConfig, gmres, pcg
from .partition import (CfSplitting, StrengthMatrix, classical_strength, greedy_aggregate,
                        rs_coarsen, symmetric_strength)
from .problems import ProblemSpec, build_problem
from .relaxation import RelaxConfig
from .transfer import TransferConfig, clair_transfer, classical_interpolation, lair_restriction

__all__ = ['Hierarchy', 'Level', 'SolverConfig', 'classical_config', 'clair_config',
           'grid_complexity', 'lair_config', 'operator_complexity', 'setup', 'vcycle',
           'ConvergenceReport', 'KrylovConfig', 'gmres', 'pcg', 'CfSplitting', 'StrengthMatrix',
           'classical_strength', 'greedy_aggregate', 'rs_coarsen', 'symmetric_strength',
           'ProblemSpec', 'build_problem', 'RelaxConfig', 'TransferConfig', 'clair_transfer',
           'classical_interpolation', 'lair_restriction']

__version__ = '0.1.0'
