"""Weak and strong approximation constants of first-level restrictions.

Uses the SPD surrogate ``A Q`` (``Q`` from the SVD of ``A``) and reports, for
each restriction, the largest constant over all vectors and the constants of
the ten smallest singular vectors.

    python3 demos/approximation_constants.py [n]
"""
import sys

import numpy as np

from airamg.analysis import approximation_report
from airamg.cli import preset_config
from airamg.hierarchy import setup
from airamg.problems import advdiff_upwind_2d, block_diag_prescale

n = int(sys.argv[1]) if len(sys.argv) > 1 else 16
A = block_diag_prescale(advdiff_upwind_2d(n, 10.0))
for name in ('clair', 'clair-fc', 'lair'):
    H = setup(A, preset_config(name, symmetric=False))
    wap, sap = approximation_report(A, R=H.levels[0].R)
    print(f"{name:>9}: n_c={H.levels[0].splitting.c_count:<5} "
          f"K_max(WAP)={wap.k_max:8.4f}  K_max(SAP)={sap.k_max:10.4f}")
    print('           smallest-sigma WAP constants:',
          np.array2string(wap.per_vector_constants[:10], precision=3))
