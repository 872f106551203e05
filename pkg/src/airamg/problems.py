"""Deterministic test matrices on uniform node-centered grids.

Unknowns are numbered lexicographically with ``x`` fastest. Dirichlet
boundary nodes are eliminated.
"""
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .sparse import as_csr, canonicalize

__all__ = ['ProblemSpec', 'build_problem', 'poisson_1d', 'poisson_2d', 'poisson_3d',
           'q1_element_stiffness', 'aniso_q1_2d', 'jump_coefficient_2d', 'advdiff_upwind_2d',
           'constant_field', 'recirculating_field', 'zero_field', 'grid_spacing', 'block_diag_prescale',
           'SAWTOOTH_POLYGON', 'points_in_polygon']

KINDS = ('Identity', 'Poisson2D', 'Poisson3D', 'AnisoDiffusion2D', 'JumpBoxInBox',
         'JumpSawtooth', 'AdvDiffConstant', 'AdvDiffRecirculating')

# Shaded region of the sawtooth jump problem on [0, 16]^2: a slab whose top
# edge is a row of teeth. Schematic; pass ``polygon=`` to override.
SAWTOOTH_POLYGON = np.array([
    (2.0, 2.0), (14.0, 2.0), (14.0, 10.0), (12.5, 14.0), (11.0, 10.0), (9.5, 14.0),
    (8.0, 10.0), (6.5, 14.0), (5.0, 10.0), (3.5, 14.0), (2.0, 10.0),
])


def poisson_1d(n, scale=True):
    h = 1.0 / (n + 1)
    A = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1])
    return canonicalize(A / h**2 if scale else A)


def poisson_2d(nx, ny=None, scale=True):
    """5-point Laplacian on the unit square, ``nx * ny`` interior unknowns."""
    ny = nx if ny is None else ny
    if min(nx, ny) < 2:
        raise ValueError('grid dimensions must be >= 2')
    Tx, Ty = poisson_1d(nx, scale), poisson_1d(ny, scale)
    A = sp.kron(sp.identity(ny), Tx) + sp.kron(Ty, sp.identity(nx))
    return canonicalize(A)


def poisson_3d(nx, ny=None, nz=None, scale=True):
    ny = nx if ny is None else ny
    nz = nx if nz is None else nz
    if min(nx, ny, nz) < 2:
        raise ValueError('grid dimensions must be >= 2')
    Tx, Ty, Tz = (poisson_1d(m, scale) for m in (nx, ny, nz))
    Ix, Iy, Iz = (sp.identity(m) for m in (nx, ny, nz))
    A = sp.kron(Iz, sp.kron(Iy, Tx)) + sp.kron(Iz, sp.kron(Ty, Ix)) + sp.kron(Tz, sp.kron(Iy, Ix))
    return canonicalize(A)


def _tensor(eps, phi):
    c, s = np.cos(phi), np.sin(phi)
    Q = np.array([[c, -s], [s, c]])
    return Q.T @ np.diag([1.0, eps]) @ Q


def q1_element_stiffness(K, hx=1.0, hy=1.0):
    """4x4 bilinear element matrix of ``int grad(phi_a)^T K grad(phi_b)``.

    Local node order: (0,0), (1,0), (0,1), (1,1). Two-point Gauss quadrature
    integrates the products exactly.
    """
    g = 0.5 + np.array([-1.0, 1.0]) / (2 * np.sqrt(3.0))
    corners = [(0, 0), (1, 0), (0, 1), (1, 1)]
    Ke = np.zeros((4, 4))
    for xi in g:
        for eta in g:
            grads = np.array([
                [(2 * a - 1) * (eta if b else 1 - eta) / hx,
                 (2 * b - 1) * (xi if a else 1 - xi) / hy] for a, b in corners])
            Ke += 0.25 * hx * hy * grads @ K @ grads.T
    return 0.5 * (Ke + Ke.T)   # exact symmetry keeps the assembled matrix exactly symmetric


def aniso_q1_2d(nx, ny=None, eps=0.001, phi=0.0):
    """Q1 stiffness matrix of ``-div(Q^T D Q grad u)`` on the unit square.

    ``D = diag(1, eps)`` and ``Q`` rotates by ``phi``. The grid has ``nx * ny``
    interior nodes and homogeneous Dirichlet conditions.
    """
    ny = nx if ny is None else ny
    if eps <= 0:
        raise ValueError('eps must be positive')
    if min(nx, ny) < 2:
        raise ValueError('grid dimensions must be >= 2')
    Ke = q1_element_stiffness(_tensor(eps, phi), 1.0 / (nx + 1), 1.0 / (ny + 1))
    # full node grid including the boundary, (nx + 2) x (ny + 2)
    ex, ey = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing='xy')
    ex, ey = ex.ravel(), ey.ravel()
    offsets = ((0, 0), (1, 0), (0, 1), (1, 1))
    ix = np.stack([ex + a for a, _ in offsets], axis=1)
    iy = np.stack([ey + b for _, b in offsets], axis=1)
    interior = (ix >= 1) & (ix <= nx) & (iy >= 1) & (iy <= ny)
    dof = np.where(interior, (iy - 1) * nx + (ix - 1), -1)
    r = np.repeat(dof[:, :, None], 4, axis=2)
    c = np.repeat(dof[:, None, :], 4, axis=1)
    v = np.broadcast_to(Ke, r.shape)
    keep = (r >= 0) & (c >= 0)
    A = sp.coo_matrix((v[keep], (r[keep], c[keep])), shape=(nx * ny, nx * ny))
    return canonicalize(A)


def points_in_polygon(x, y, polygon):
    """Even-odd rule membership of points ``(x, y)`` in a closed polygon."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    inside = np.zeros(x.shape, dtype=bool)
    px, py = polygon[:, 0], polygon[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    for x0, y0, x1, y1 in zip(px, py, qx, qy):
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide='ignore', invalid='ignore'):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xint)
    return inside


def _variable_diffusion(d, h, scale=True):
    """5-point operator with face coefficients averaged from the two nodes.

    ``d`` holds nodal values on the full grid (boundary included).
    """
    nyf, nxf = d.shape
    nx, ny = nxf - 2, nyf - 2
    idx = -np.ones((nyf, nxf), dtype=np.int64)
    idx[1:-1, 1:-1] = np.arange(nx * ny).reshape(ny, nx)
    rows, cols, vals = [], [], []
    center = np.zeros((ny, nx))
    inner = (slice(1, -1), slice(1, -1))
    for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        nb = (slice(1 + dy, nyf - 1 + dy), slice(1 + dx, nxf - 1 + dx))
        face = 0.5 * (d[inner] + d[nb])
        center += face
        j = idx[nb]
        ok = j >= 0
        rows.append(idx[inner][ok])
        cols.append(j[ok])
        vals.append(-face[ok])
    rows.append(idx[inner].ravel())
    cols.append(idx[inner].ravel())
    vals.append(center.ravel())
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nx * ny, nx * ny))
    A = canonicalize(A)
    return A / h**2 if scale else A


def jump_coefficient_2d(n, kind='box', d_high=1e4, polygon=None, scale=True):
    """Jumping-coefficient diffusion ``-div(d grad u)`` with ``n * n`` interior nodes.

    ``kind='box'``: unit square, ``d = d_high`` on ``[0.44, 0.52]^2``.
    ``kind='sawtooth'``: ``[0, 16]^2``, ``d = d_high`` inside ``polygon``
    (default ``SAWTOOTH_POLYGON``).
    """
    if n < 2:
        raise ValueError('grid dimensions must be >= 2')
    length = 1.0 if kind == 'box' else 16.0
    h = length / (n + 1)
    t = np.arange(n + 2) * h
    X, Y = np.meshgrid(t, t, indexing='xy')
    if kind == 'box':
        inside = (X >= 0.44) & (X <= 0.52) & (Y >= 0.44) & (Y <= 0.52)
    elif kind == 'sawtooth':
        inside = points_in_polygon(X, Y, SAWTOOTH_POLYGON if polygon is None else np.asarray(polygon))
    elif kind == 'uniform':
        inside = np.zeros_like(X, dtype=bool)
    else:
        raise ValueError(f'unknown jump geometry {kind!r}')
    d = np.where(inside, d_high, 1.0)
    return canonicalize(_variable_diffusion(d, h, scale))


def constant_field(x, y):
    return np.full_like(x, np.sqrt(2.0 / 3.0)), np.full_like(y, np.sqrt(1.0 / 3.0))


def recirculating_field(x, y):
    return x * (1 - x) * (2 * y - 1), -(2 * x - 1) * (1 - y) * y


def zero_field(x, y):
    return np.zeros_like(x), np.zeros_like(y)


FIELDS = {'constant': constant_field, 'recirculating': recirculating_field, 'zero': zero_field}


def _axis(n, direction, outflow):
    """Node coordinates on [-1, 1]; keeps the downstream end when ``outflow``."""
    if not outflow or direction == 0:
        h = 2.0 / (n + 1)
        return -1.0 + h * np.arange(1, n + 1), h
    h = 2.0 / n
    if direction > 0:
        return -1.0 + h * np.arange(1, n + 1), h
    return -1.0 + h * np.arange(n), h


def advdiff_upwind_2d(n, alpha, field='constant', ny=None):
    """First-order upwind finite differences for ``-alpha lap(u) + b . grad(u)``.

    Domain ``[-1, 1]^2``. With ``alpha > 0`` every wall is Dirichlet. With
    ``alpha == 0`` (constant field only) only inflow walls are Dirichlet and
    the downstream boundary nodes are kept as unknowns, so the lexicographic
    ordering makes the matrix lower triangular for a positive field.
    ``field`` is a name from ``FIELDS`` or a callable ``(x, y) -> (b1, b2)``.
    """
    ny = n if ny is None else ny
    if alpha < 0:
        raise ValueError('alpha must be nonnegative')
    if field == 'recirculating' and alpha == 0:
        raise ValueError('the recirculating problem is ill-posed without diffusion')
    b_fn = field if callable(field) else FIELDS[field]
    outflow = alpha == 0
    if outflow:
        # pure advection keeps the outflow nodes, which needs a one-signed field
        probe = np.linspace(-1, 1, 7)
        b1, b2 = b_fn(*np.meshgrid(probe, probe))
        sx, sy = np.sign(b1.ravel()[0]), np.sign(b2.ravel()[0])
        if np.any(np.sign(b1) != sx) or np.any(np.sign(b2) != sy) or (sx == 0 and sy == 0):
            raise ValueError('alpha = 0 needs a nonzero field of constant sign')
    else:
        sx = sy = 0
    x, hx = _axis(n, sx, outflow)
    y, hy = _axis(ny, sy, outflow)
    X, Y = np.meshgrid(x, y, indexing='xy')
    bx, by = b_fn(X, Y)
    pad = -np.ones((ny + 2, n + 2), dtype=np.int64)
    pad[1:-1, 1:-1] = np.arange(n * ny).reshape(ny, n)
    idx = pad[1:-1, 1:-1]

    center = alpha * (2 / hx**2 + 2 / hy**2) + np.abs(bx) / hx + np.abs(by) / hy
    rows, cols, vals = [idx.ravel()], [idx.ravel()], [center.ravel()]
    # (dy, dx) neighbor offsets; upwinding puts |b| on the upstream side only
    couplings = {
        (0, -1): -alpha / hx**2 - np.maximum(bx, 0) / hx,
        (0, 1): -alpha / hx**2 + np.minimum(bx, 0) / hx,
        (-1, 0): -alpha / hy**2 - np.maximum(by, 0) / hy,
        (1, 0): -alpha / hy**2 + np.minimum(by, 0) / hy,
    }
    for (dy, dx), coef in couplings.items():
        nb = pad[1 + dy:ny + 1 + dy, 1 + dx:n + 1 + dx]
        ok = nb >= 0
        rows.append(idx[ok])
        cols.append(nb[ok])
        vals.append(coef[ok])
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n * ny, n * ny))
    return canonicalize(A)


def block_diag_prescale(A, block_size=1):
    """``Bdiag^{-1} A`` where ``Bdiag`` is the block diagonal of ``A``."""
    A = as_csr(A)
    n = A.shape[0]
    if n % block_size:
        raise ValueError(f'n={n} is not divisible by block_size={block_size}')
    nb = n // block_size
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    same = rows // block_size == A.indices // block_size
    blocks = np.zeros((nb, block_size, block_size))
    blocks[rows[same] // block_size, rows[same] % block_size, A.indices[same] % block_size] = A.data[same]
    inv = np.empty_like(blocks)
    for k in range(nb):
        try:
            inv[k] = np.linalg.inv(blocks[k])
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(f'diagonal block {k} is singular') from None
        if not np.all(np.isfinite(inv[k])):
            raise np.linalg.LinAlgError(f'diagonal block {k} is singular')
    Binv = sp.block_diag(list(inv), format='csr') if block_size > 1 else sp.diags(inv[:, 0, 0])
    return canonicalize(Binv @ A)


@dataclass
class ProblemSpec:
    kind: str = 'Poisson2D'
    n: Tuple[int, ...] = (32, 32)
    epsilon: float = 0.001
    phi: float = 0.0
    alpha: float = 0.0
    d_high: float = 1e4
    polygon: Optional[list] = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f'unknown problem kind {self.kind!r}; choose from {KINDS}')
        self.n = tuple(int(m) for m in np.atleast_1d(self.n))
        if self.kind != 'Identity' and min(self.n) < 2:
            raise ValueError('grid dimensions must be >= 2')
        if self.kind == 'AnisoDiffusion2D' and self.epsilon <= 0:
            raise ValueError('epsilon must be positive')
        if self.alpha < 0:
            raise ValueError('alpha must be nonnegative')

    def to_dict(self):
        return asdict(self)


def grid_spacing(spec):
    """Mesh width ``h`` used for ``spec`` (first axis)."""
    n = spec.n[0]
    if spec.kind in ('Poisson2D', 'Poisson3D', 'AnisoDiffusion2D', 'JumpBoxInBox'):
        return 1.0 / (n + 1)
    if spec.kind == 'JumpSawtooth':
        return 16.0 / (n + 1)
    if spec.kind.startswith('AdvDiff'):
        return 2.0 / n if spec.alpha == 0 else 2.0 / (n + 1)
    return None


def build_problem(spec):
    """Matrix for a ``ProblemSpec``, plus the block size used for prescaling."""
    n = spec.n
    if spec.kind == 'Identity':
        return canonicalize(sp.identity(n[0])), 1
    if spec.kind == 'Poisson2D':
        return poisson_2d(*n[:2]), 1
    if spec.kind == 'Poisson3D':
        return poisson_3d(*n[:3]), 1
    if spec.kind == 'AnisoDiffusion2D':
        return aniso_q1_2d(*n[:2], eps=spec.epsilon, phi=spec.phi), 1
    if spec.kind == 'JumpBoxInBox':
        return jump_coefficient_2d(n[0], 'box', spec.d_high), 1
    if spec.kind == 'JumpSawtooth':
        poly = None if spec.polygon is None else np.asarray(spec.polygon, dtype=float)
        return jump_coefficient_2d(n[0], 'sawtooth', spec.d_high, poly), 1
    field_name = 'constant' if spec.kind == 'AdvDiffConstant' else 'recirculating'
    return advdiff_upwind_2d(n[0], spec.alpha, field_name, n[1] if len(n) > 1 else None), 1
