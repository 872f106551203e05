import numpy as np
import pytest
import scipy.sparse as sp

import airamg
import airamg.hierarchy as _hier

# Every CLAIR hierarchy built anywhere in the suite reports its worst
# constraint residual here; the session fails if any exceeds the bound.
CONSTRAINT_TOL = 1e-10
CONSTRAINT_LOG = []
_original_setup = _hier.setup


def _recording_setup(A, cfg=None):
    H = _original_setup(A, cfg)
    if H.config.method == 'CLAIR' and H.config.transfer.constrain:
        res = [L.constraint_residual for L in H.levels[:-1]]
        res += [L.r_constrained_residual for L in H.levels[:-1]
                if L.r_constrained_residual is not None]
        CONSTRAINT_LOG.append((A.shape[0], max(res, default=0.0)))
    return H


_hier.setup = _recording_setup
airamg.setup = _recording_setup


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_sessionfinish(session, exitstatus):
    bad = [r for r in CONSTRAINT_LOG if r[1] > CONSTRAINT_TOL]
    if bad:
        print(f'\nconstraint residual above {CONSTRAINT_TOL:g} in {len(bad)} hierarchies: {bad}')
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES and not CONSTRAINT_LOG:
        return
    tr = terminalreporter
    tr.section('acceptance criteria')
    for line in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
        tr.write_line(line[1])
    if CONSTRAINT_LOG:
        worst = max(r[1] for r in CONSTRAINT_LOG)
        verdict = 'PASS' if worst <= CONSTRAINT_TOL else 'FAIL'
        tr.write_line(f'[suite-wide] constraint residual over {len(CONSTRAINT_LOG)} CLAIR '
                      f'hierarchies: max {worst:.2e} (bound {CONSTRAINT_TOL:g}) {verdict}')


def random_spd(n, rng, density=0.3):
    M = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    return sp.csr_matrix(M @ M.T + n * np.eye(n))


def random_upwind(n, rng, density=0.3):
    """Lower triangular with a dominant diagonal, like a perfectly ordered upwind operator."""
    L = np.tril(rng.standard_normal((n, n)) * (rng.random((n, n)) < density), -1)
    return sp.csr_matrix(L + np.diag(2 + rng.random(n)))


def random_general(n, rng, density=0.3):
    M = rng.standard_normal((n, n)) * (rng.random((n, n)) < density)
    return sp.csr_matrix(M + n * np.eye(n))


def random_splitting(n, rng, frac=0.35):
    is_c = rng.random(n) < frac
    is_c[rng.integers(n)] = True
    is_c[rng.integers(n)] = False
    if is_c.all():
        is_c[0] = False
    return airamg.CfSplitting(is_c)


def full_strength(n):
    """Strength graph with every off-diagonal coupling strong."""
    return airamg.classical_strength(sp.csr_matrix(np.ones((n, n)) - 2 * np.eye(n)), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
