"""Operator complexity and PCG iterations for 2D Poisson under refinement.

Compares constrained lAIR with aggregation against lAIR with a degree-1
restriction pattern.

    python3 demos/poisson_scaling.py [max_n]
"""
import sys

from airamg.cli import RunManifest, preset_config, run_benchmark
from airamg.krylov import KrylovConfig
from airamg.problems import ProblemSpec

max_n = int(sys.argv[1]) if len(sys.argv) > 1 else 128
sizes = [n for n in (32, 64, 128, 256) if n <= max_n]

print(f"{'n':>6} {'method':>10} {'iters':>6} {'OC':>6} {'gamma':>7} {'wpd':>6}")
for n in sizes:
    for preset in ('clair', 'lair-deg1'):
        m = RunManifest(ProblemSpec('Poisson2D', (n, n)), preset_config(preset),
                        KrylovConfig('CG'))
        r, _, _ = run_benchmark(m)
        print(f"{n:>4}^2 {preset:>10} {r['iterations']:>6} {r['operator_complexity']:6.3f} "
              f"{r['gamma']:7.3f} {r['work_per_digit']:6.2f}")
