"""Honour ``AIRAMG_NUM_THREADS`` before numpy loads its BLAS."""
import os

_n = os.environ.get('AIRAMG_NUM_THREADS')
if _n:
    for _var in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
        os.environ.setdefault(_var, _n)
