"""Preconditioned CG and right-preconditioned GMRES."""
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

__all__ = ['KrylovConfig', 'ConvergenceReport', 'IndefiniteError', 'pcg', 'gmres',
           'convergence_factor', 'work_per_digit', 'scaled_abs_tol']


class IndefiniteError(np.linalg.LinAlgError):
    """Raised by CG when ``p^T A p <= 0``."""


@dataclass(frozen=True)
class KrylovConfig:
    """Accelerator settings.

    The solve stops once ``||r||_2 <= max(abs_tol, rel_tol * ||b - A x0||_2)``.
    ``restart=None`` runs GMRES without restarts.
    """
    method: str = 'CG'
    rel_tol: float = 1e-8
    abs_tol: float = 0.0
    max_iters: int = 100
    restart: Optional[int] = None

    def __post_init__(self):
        if self.method not in ('CG', 'GMRES'):
            raise ValueError(f'method must be CG or GMRES, got {self.method!r}')
        if not (self.rel_tol >= 0 and self.abs_tol >= 0) or self.rel_tol == self.abs_tol == 0:
            raise ValueError('tolerances must be nonnegative and not both zero')
        if self.max_iters < 1:
            raise ValueError('max_iters must be >= 1')
        if self.restart is not None and self.restart < 1:
            raise ValueError('restart must be >= 1')

    def to_dict(self):
        return asdict(self)


def scaled_abs_tol(n_per_dim, base=1e-9, base_n=32, dim=2):
    """Absolute tolerance scaled per refinement to mimic a discrete L2 norm.

    Each halving of ``h`` multiplies the tolerance by ``2**(dim/2)``
    (2 in 2D, ``sqrt(8)`` in 3D).
    """
    return base * (n_per_dim / base_n) ** (dim / 2)


def convergence_factor(history):
    """Average residual reduction ``(||r_k|| / ||r_0||)**(1/k)``."""
    h = np.asarray(history, dtype=float)
    k = len(h) - 1
    if k <= 0 or h[0] == 0:
        return 0.0
    return float((h[-1] / h[0]) ** (1.0 / k))


def work_per_digit(oc, gamma):
    """``3.5 * OC / |log10(gamma)|``; infinite when ``gamma >= 1``."""
    if gamma <= 0:
        return 0.0
    if gamma >= 1:
        return float('inf')
    return 3.5 * oc / abs(np.log10(gamma))


@dataclass
class ConvergenceReport:
    iterations: int
    residual_history: np.ndarray
    converged: bool
    oc: float = 1.0
    gamma: float = field(init=False)
    work_per_digit: float = field(init=False)

    def __post_init__(self):
        self.residual_history = np.asarray(self.residual_history, dtype=float)
        self.gamma = convergence_factor(self.residual_history)
        self.work_per_digit = work_per_digit(self.oc, self.gamma)

    def with_oc(self, oc):
        return ConvergenceReport(self.iterations, self.residual_history, self.converged, oc)

    def to_dict(self):
        return {'iterations': self.iterations, 'converged': self.converged,
                'gamma': self.gamma, 'oc': self.oc, 'work_per_digit': self.work_per_digit,
                'residual_history': self.residual_history.tolist()}


def _operator(M):
    if M is None:
        return lambda r: r.copy()
    if callable(M):
        return M
    return lambda r: M @ r


def _start(A, b, x0, cfg):
    b = np.asarray(b, dtype=np.float64)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f'shape mismatch: A {A.shape}, b {b.shape}')
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    rnorm = float(np.linalg.norm(r))
    return b, x, r, rnorm, max(cfg.abs_tol, cfg.rel_tol * rnorm)


def pcg(A, b, x0=None, M=None, cfg=None):
    """Preconditioned conjugate gradients.

    Parameters
    ----------
    A : sparse or dense matrix
        Symmetric positive definite.
    M : callable, matrix or None
        Preconditioner applied as ``z = M(r)``.

    Returns
    -------
    x : ndarray
    report : ConvergenceReport
    """
    cfg = KrylovConfig('CG') if cfg is None else cfg
    b, x, r, rnorm, tol = _start(A, b, x0, cfg)
    hist = [rnorm]
    if rnorm <= tol:
        return x, ConvergenceReport(0, hist, True)
    Minv = _operator(M)
    z = Minv(r)
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, cfg.max_iters + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if not pAp > 0:
            raise IndefiniteError(f'p^T A p = {pAp:.3e} <= 0 at iteration {it}')
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = float(np.linalg.norm(r))
        hist.append(rnorm)
        if rnorm <= tol:
            return x, ConvergenceReport(it, hist, True)
        z = Minv(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, ConvergenceReport(cfg.max_iters, hist, False)


def gmres(A, b, x0=None, M=None, cfg=None):
    """Right-preconditioned GMRES, ``A M y = r0``, ``x = x0 + M y``.

    The monitored residual is the true residual ``||b - A x||`` (up to the
    usual Givens recurrence rounding). With ``cfg.restart`` set, a cycle that
    fails to reduce the residual ends the solve as not converged.
    """
    cfg = KrylovConfig('GMRES') if cfg is None else cfg
    b, x, r, rnorm, tol = _start(A, b, x0, cfg)
    hist = [rnorm]
    if rnorm <= tol:
        return x, ConvergenceReport(0, hist, True)
    Minv = _operator(M)
    n = b.shape[0]
    m = cfg.max_iters if cfg.restart is None else cfg.restart
    total = 0
    while total < cfg.max_iters:
        beta = rnorm
        steps = min(m, cfg.max_iters - total)
        V = np.zeros((steps + 1, n))
        Z = np.zeros((steps, n))
        H = np.zeros((steps + 1, steps))
        cs = np.zeros(steps)
        sn = np.zeros(steps)
        g = np.zeros(steps + 1)
        g[0] = beta
        V[0] = r / beta
        j = 0
        done = False
        for j in range(steps):
            Z[j] = Minv(V[j])
            w = A @ Z[j]
            for _ in range(2):
                h = V[:j + 1] @ w
                w -= h @ V[:j + 1]
                H[:j + 1, j] += h
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * np.abs(H[:j + 1, j]).max(initial=0.0)
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = (1.0, 0.0) if denom == 0 else (H[j, j] / denom, H[j + 1, j] / denom)
            H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            hist.append(abs(g[j + 1]))
            if abs(g[j + 1]) <= tol or breakdown:
                done = True
                break
        k = j + 1
        y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k else np.zeros(0)
        x += y @ Z[:k]
        r = b - A @ x
        new_norm = float(np.linalg.norm(r))
        hist[-1] = new_norm
        if new_norm <= tol or (done and abs(g[k]) <= tol):
            return x, ConvergenceReport(total, hist, new_norm <= tol)
        if done or new_norm >= rnorm:
            break
        rnorm = new_norm
    return x, ConvergenceReport(total, hist, False)
