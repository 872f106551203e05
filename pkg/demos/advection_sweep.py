"""Sweep the diffusion coefficient of the upwind advection-diffusion problem.

Writes ``advection_sweep.csv`` with one row per (alpha, preset) pair and
prints a short table. The advection direction is constant.

    python3 demos/advection_sweep.py [n]
"""
import sys

from airamg.cli import RunManifest, preset_config, run_sweep
from airamg.krylov import KrylovConfig
from airamg.problems import ProblemSpec

n = int(sys.argv[1]) if len(sys.argv) > 1 else 64
template = RunManifest(ProblemSpec('AdvDiffConstant', (n, n)), preset_config('clair', False),
                       KrylovConfig('GMRES'))
rows = run_sweep(template, {'alpha': [10.0, 1.0, 0.1, 0.01, 0.0],
                            'preset': ['clair', 'clair-fc', 'lair']},
                 'advection_sweep.csv')
for r in rows:
    print(f"{r['axis']:<28} {r['status']:<10} iters={r['iterations']:<4} "
          f"OC={float(r['operator_complexity'] or 'nan'):.2f} "
          f"wpd={float(r['work_per_digit'] or 'nan'):.2f}")
