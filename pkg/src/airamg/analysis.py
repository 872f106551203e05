"""Fractional approximation property (FAP) diagnostics for transfer operators.

For an SPD matrix ``Acal`` and a coarse basis ``T``, the FAP(beta, eta)
constant of a vector ``v`` is

    K(v) = ||Acal||^(2 beta - eta) ||(I - Pi) v||^2_{Acal^eta} / ||v||^2_{Acal^(2 beta)}

with ``Pi = T (T^T Acal^eta T)^{-1} T^T Acal^eta`` the ``Acal^eta``-orthogonal
projector onto ``range(T)``. WAP is FAP(1/2, 0) and SAP is FAP(1, 1).
Nonsymmetric ``A`` is handled through the polar factor ``Q = V U^T``: ``AQ``
and ``QA`` are SPD and share the singular values of ``A``. Everything here is
dense and meant for a few thousand unknowns at most.
"""
import csv
import json
import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import svd

__all__ = ['ApproxPropertyResult', 'build_spd_surrogate', 'spd_power', 'projector',
           'fap_constant', 'fap_constants', 'fap_kmax', 'approximation_report',
           'write_report_csv', 'report_summary', 'MAX_DENSE']

MAX_DENSE = 2048
WAP = (0.5, 0.0)
SAP = (1.0, 1.0)


class NearSingularError(np.linalg.LinAlgError):
    pass


@dataclass
class ApproxPropertyResult:
    beta: float
    eta: float
    per_vector_constants: np.ndarray
    k_max: float
    singular_values: np.ndarray
    side: str = 'Left'


def _dense(M):
    M = M.toarray() if hasattr(M, 'toarray') else np.asarray(M, dtype=np.float64)
    if M.shape[0] > MAX_DENSE:
        raise ValueError(f'dense analysis is capped at n = {MAX_DENSE}, got {M.shape[0]}')
    return M


def build_spd_surrogate(A):
    """Return ``(QA, AQ, svd(A))`` with ``Q = V U^T``, both products symmetrized."""
    A = _dense(A)
    res = svd(A)
    s = res.singular_values
    if s[0] < 1e-12 * s[-1]:
        raise NearSingularError(f'sigma_min / sigma_max = {s[0] / s[-1]:.2e}')
    Q = res.V @ res.U.T
    QA, AQ = Q @ A, A @ Q
    return (QA + QA.T) / 2, (AQ + AQ.T) / 2, res


class _Spectral:
    """Eigendecomposition of an SPD matrix with clipped eigenvalues."""

    def __init__(self, M):
        lam, X = np.linalg.eigh((M + M.T) / 2)
        self.norm = lam.max()
        self.lam = np.maximum(lam, 1e-14 * self.norm)
        self.X = X

    def power(self, p):
        if p == 0:
            return np.eye(len(self.lam))
        return (self.X * self.lam ** p) @ self.X.T


def spd_power(M, p):
    """``M**p`` for SPD ``M`` via its eigendecomposition."""
    return _Spectral(_dense(M)).power(p)


def projector(T, Acal, eta):
    """``Pi = T (T^T Acal^eta T)^+ T^T Acal^eta``."""
    T = _dense(T)
    return _projector(T, _Spectral(_dense(Acal)).power(eta))


def _projector(T, Aeta):
    G = T.T @ Aeta @ T
    try:
        Ginv = np.linalg.inv(G)
        if not np.all(np.isfinite(Ginv)) or np.linalg.cond(G) > 1e14:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        warnings.warn('coarse Gram matrix T^T Acal^eta T is singular; using pseudoinverse',
                      RuntimeWarning, stacklevel=3)
        Ginv = np.linalg.pinv(G)
    return T @ Ginv @ (T.T @ Aeta)


def fap_constants(T, Acal, beta, eta, V):
    """FAP constants for each column of ``V``."""
    T, Acal = _dense(T), _dense(Acal)
    if beta < 0 or eta < 0:
        raise ValueError('beta and eta must be nonnegative')
    sp_ = _Spectral(Acal)
    Aeta = sp_.power(eta)
    A2b = sp_.power(2 * beta)
    V = np.asarray(V, dtype=np.float64)
    squeeze = V.ndim == 1
    V = V[:, None] if squeeze else V
    E = V - _projector(T, Aeta) @ V
    num = np.einsum('ik,ik->k', E, Aeta @ E)
    den = np.einsum('ik,ik->k', V, A2b @ V)
    K = sp_.norm ** (2 * beta - eta) * np.maximum(num, 0.0) / den
    # vectors that already lie in range(T) get exactly zero
    K[np.linalg.norm(E, axis=0) <= 1e-12 * np.linalg.norm(V, axis=0)] = 0.0
    return K[0] if squeeze else K


def fap_constant(T, Acal, beta, eta, v):
    return float(fap_constants(T, Acal, beta, eta, np.asarray(v, dtype=np.float64)))


def fap_kmax(T, Acal, beta, eta):
    """``||Acal||^(2 beta - eta) * ||Acal^(eta/2) (I - Pi) Acal^(-beta)||_2^2``."""
    T, Acal = _dense(T), _dense(Acal)
    sp_ = _Spectral(Acal)
    n = Acal.shape[0]
    Pi = _projector(T, sp_.power(eta))
    M = sp_.power(eta / 2) @ (np.eye(n) - Pi) @ sp_.power(-beta)
    return float(sp_.norm ** (2 * beta - eta) * np.linalg.norm(M, 2) ** 2)


def approximation_report(A, R=None, P=None, pairs=(WAP, SAP), side='Left'):
    """FAP constants for every singular vector of ``A``.

    ``side='Left'`` analyses ``T = R^T`` against ``AQ`` over the left singular
    vectors; ``side='Right'`` analyses ``T = P`` against ``QA`` over the right
    ones. Constants are listed in ascending singular value order.
    """
    QA, AQ, res = build_spd_surrogate(A)
    if side == 'Left':
        if R is None:
            raise ValueError('left analysis needs R')
        T, Acal, vecs = _dense(R).T, AQ, res.U
    elif side == 'Right':
        if P is None:
            raise ValueError('right analysis needs P')
        T, Acal, vecs = _dense(P), QA, res.V
    else:
        raise ValueError(f'side must be Left or Right, got {side!r}')
    out = []
    for beta, eta in pairs:
        out.append(ApproxPropertyResult(beta, eta, fap_constants(T, Acal, beta, eta, vecs),
                                        fap_kmax(T, Acal, beta, eta),
                                        res.singular_values.copy(), side))
    return out


def write_report_csv(path, results):
    """Columns ``index, sigma`` then one ``K_*`` column per (beta, eta) pair."""
    names = [_label(r) for r in results]
    sigma = results[0].singular_values
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh)
        w.writerow(['index', 'sigma'] + names)
        for i in range(len(sigma)):
            w.writerow([i, repr(float(sigma[i]))] +
                       [repr(float(r.per_vector_constants[i])) for r in results])


def report_summary(results):
    return {_label(r): {'beta': r.beta, 'eta': r.eta, 'k_max': r.k_max, 'side': r.side,
                        'max_vector_constant': float(np.max(r.per_vector_constants))}
            for r in results}


def _label(r):
    if (r.beta, r.eta) == WAP:
        return 'K_wap'
    if (r.beta, r.eta) == SAP:
        return 'K_sap'
    return f'K_fap_{r.beta:g}_{r.eta:g}'


def dump_summary(path, results):
    with open(path, 'w') as fh:
        json.dump(report_summary(results), fh, indent=2, sort_keys=True)
