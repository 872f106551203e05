"""Command line driver for reduction-based AMG runs.

Subcommands cover single solves, parameter sweeps, matrix export and
approximation-property analysis.

Every run is described by a JSON manifest (problem, solver, Krylov settings,
seed). Flags override manifest fields, and ``--write-manifest`` saves the
merged result so a run can be repeated exactly.

Set ``AIRAMG_NUM_THREADS`` to cap BLAS threads.
"""
import argparse
import csv
import hashlib
import itertools
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import approximation_report, report_summary, write_report_csv
from .hierarchy import (SolverConfig, classical_config, clair_config, grid_complexity,
                        lair_config, operator_complexity, setup)
from .krylov import KrylovConfig, gmres, pcg, scaled_abs_tol
from .problems import ProblemSpec, block_diag_prescale, build_problem, grid_spacing
from .sparse import mmwrite

__all__ = ['RunManifest', 'run_benchmark', 'run_sweep', 'preset_config', 'main']

log = logging.getLogger('airamg')

PRESETS = ('clair', 'clair-fc', 'lair', 'lair-deg1', 'classical')
NONSYMMETRIC_KINDS = ('AdvDiffConstant', 'AdvDiffRecirculating')


def preset_config(name, symmetric=True):
    """Named solver presets with the standard parameters for each setting."""
    if name == 'clair':
        return clair_config(symmetric=symmetric)
    if name == 'clair-fc':
        return clair_config(symmetric=symmetric, coarsen_type='FC')
    if name == 'lair':
        return lair_config(symmetric=symmetric)
    if name == 'lair-deg1':
        return lair_config(symmetric=symmetric, r_degree=1)
    if name == 'classical':
        return classical_config()
    raise ValueError(f'unknown preset {name!r}; choose from {PRESETS}')


def is_symmetric_kind(kind):
    return kind not in NONSYMMETRIC_KINDS


@dataclass
class RunManifest:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    solver: SolverConfig = field(default_factory=clair_config)
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    seed: int = 0
    tolerance_mode: str = 'relative'
    label: str = ''
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tolerance_mode not in ('relative', 'scaled_absolute'):
            raise ValueError(f'unknown tolerance_mode {self.tolerance_mode!r}')

    def to_dict(self):
        return {'problem': self.problem.to_dict(), 'solver': self.solver.to_dict(),
                'krylov': self.krylov.to_dict(), 'seed': self.seed,
                'tolerance_mode': self.tolerance_mode, 'label': self.label,
                'outputs': dict(self.outputs)}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + '\n'

    @classmethod
    def from_dict(cls, d):
        prob = dict(d.get('problem', {}))
        if prob.get('n') is not None:
            prob['n'] = tuple(prob['n'])
        return cls(ProblemSpec(**prob), SolverConfig.from_dict(d.get('solver', {})),
                   KrylovConfig(**d.get('krylov', {})), int(d.get('seed', 0)),
                   d.get('tolerance_mode', 'relative'), d.get('label', ''),
                   dict(d.get('outputs', {})))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def digest(self):
        """Short hash of everything that influences the numbers (not output paths)."""
        d = self.to_dict()
        d.pop('outputs')
        d.pop('label')
        blob = json.dumps(d, sort_keys=True, separators=(',', ':')).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def initial_guess(n, seed):
    """Uniform [0, 1) start vector from numpy's PCG64 stream for ``seed``."""
    return np.random.Generator(np.random.PCG64(seed)).random(n)


def _effective_krylov(m):
    if m.tolerance_mode == 'scaled_absolute':
        dim = 3 if m.problem.kind == 'Poisson3D' else 2
        return replace(m.krylov, rel_tol=0.0, abs_tol=scaled_abs_tol(m.problem.n[0], dim=dim))
    return m.krylov


def run_benchmark(manifest, rhs=None, timing=False):
    """Build, set up and solve one manifest.

    With ``rhs=None`` the system is ``A x = 0`` from a seeded random guess,
    so the iterate is the error. Returns ``(report_dict, ConvergenceReport,
    Hierarchy)``.
    """
    A, block = build_problem(manifest.problem)
    if manifest.solver.prescale:
        A = block_diag_prescale(A, block)
    n = A.shape[0]
    t0 = time.perf_counter()
    H = setup(A, manifest.solver)
    t1 = time.perf_counter()
    b = np.zeros(n) if rhs is None else np.asarray(rhs, dtype=np.float64)
    x0 = initial_guess(n, manifest.seed) if rhs is None else None
    kcfg = _effective_krylov(manifest)
    solver = pcg if kcfg.method == 'CG' else gmres
    _, rep = solver(A, b, x0, H.aspreconditioner(), kcfg)
    t2 = time.perf_counter()
    rep = rep.with_oc(operator_complexity(H))
    report = {
        'manifest_hash': manifest.digest(),
        'label': manifest.label,
        'problem': manifest.problem.kind,
        'n': n,
        'method': manifest.solver.method,
        'coarsening': manifest.solver.coarsen_type,
        'krylov': kcfg.method,
        'iterations': rep.iterations,
        'converged': bool(rep.converged),
        'status': 'converged' if rep.converged else 'DNC',
        'gamma': rep.gamma,
        'operator_complexity': rep.oc,
        'grid_complexity': grid_complexity(H),
        'work_per_digit': rep.work_per_digit,
        'levels': H.summary()['levels'],
    }
    if timing:
        report['setup_seconds'] = t1 - t0
        report['solve_seconds'] = t2 - t1
    return report, rep, H


def write_residuals(path, rep):
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh)
        w.writerow(['iteration', 'residual'])
        for k, r in enumerate(rep.residual_history):
            w.writerow([k, repr(float(r))])


def export_transfers(directory, H, manifest):
    os.makedirs(directory, exist_ok=True)
    for k, L in enumerate(H.levels[:-1]):
        mmwrite(os.path.join(directory, f'P_{k}.mtx'), L.P)
        mmwrite(os.path.join(directory, f'R_{k}.mtx'), L.R)
        side = {'level': k, 'config_hash': manifest.digest(),
                'splitting': json.loads(L.splitting.to_json())}
        with open(os.path.join(directory, f'level_{k}.json'), 'w') as fh:
            json.dump(side, fh, sort_keys=True)


SWEEP_AXES = ('n', 'alpha', 'epsilon', 'phi', 'd_high', 'preset', 'seed')


def _apply_axis(m, name, value):
    if name == 'n':
        dims = len(m.problem.n)
        return replace(m, problem=replace(m.problem, n=(int(value),) * dims))
    if name in ('alpha', 'epsilon', 'phi', 'd_high'):
        return replace(m, problem=replace(m.problem, **{name: float(value)}))
    if name == 'seed':
        return replace(m, seed=int(value))
    if name == 'preset':
        sym = is_symmetric_kind(m.problem.kind)
        return replace(m, solver=preset_config(value, sym),
                       krylov=replace(m.krylov, method='CG' if sym else 'GMRES'))
    raise ValueError(f'unknown sweep axis {name!r}; choose from {SWEEP_AXES}')


SWEEP_COLUMNS = ('manifest_hash', 'axis', 'n', 'method', 'coarsening', 'iterations', 'status',
                 'gamma', 'operator_complexity', 'work_per_digit', 'error')


def run_sweep(template, axes, csv_path=None):
    """Cartesian product of ``axes`` (``{name: values}``) applied to ``template``.

    A failing point is recorded with its error message and the sweep goes on.
    Returns the list of row dicts (also written to ``csv_path`` if given).
    """
    if not axes or any(len(v) == 0 for v in axes.values()):
        raise ValueError('sweep needs at least one nonempty axis')
    names = list(axes)
    unknown = [k for k in names if k not in SWEEP_AXES]
    if unknown:
        raise ValueError(f'unknown sweep axis {unknown[0]!r}; choose from {SWEEP_AXES}')
    rows = []
    for combo in itertools.product(*(axes[k] for k in names)):
        row = dict.fromkeys(SWEEP_COLUMNS, '')
        row['axis'] = ';'.join(f'{k}={v}' for k, v in zip(names, combo))
        try:
            m = template
            for k, v in zip(names, combo):
                m = _apply_axis(m, k, v)
            row['manifest_hash'] = m.digest()
            rep, _, _ = run_benchmark(m)
            row.update({k: rep[k] for k in ('n', 'method', 'coarsening', 'iterations', 'status',
                                             'gamma', 'operator_complexity', 'work_per_digit')})
        except Exception as exc:  # a failed point must not abort the sweep
            log.warning('sweep point %s failed: %s', row['axis'], exc)
            row['status'] = 'error'
            row['error'] = f'{type(exc).__name__}: {exc}'
        rows.append(row)
    if csv_path:
        with open(csv_path, 'w', newline='') as fh:
            w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
            w.writeheader()
            w.writerows(rows)
    return rows


# ---------------------------------------------------------------- argparse

def _add_problem_args(p):
    g = p.add_argument_group('problem')
    g.add_argument('--problem', '--kind', dest='kind', help='problem kind, e.g. Poisson2D, AdvDiffConstant')
    g.add_argument('--n', type=int, nargs='+', help='grid points per dimension')
    g.add_argument('--alpha', type=float)
    g.add_argument('--epsilon', type=float)
    g.add_argument('--phi', type=float)
    g.add_argument('--d-high', dest='d_high', type=float)


def _add_solver_args(p):
    g = p.add_argument_group('solver')
    g.add_argument('--preset', choices=PRESETS, help='start from a named parameter set')
    g.add_argument('--method', choices=('lAIR', 'CLAIR', 'ClassicalRS'))
    g.add_argument('--coarsen-type', choices=('FC', 'Agg'))
    g.add_argument('--degree', type=int, help='CLAIR sparsity pattern degree')
    g.add_argument('--interp-theta', type=float)
    g.add_argument('--coarsen-theta', type=float)
    g.add_argument('--smoothing-steps', type=int)
    g.add_argument('--inverse', choices=('ExactLU', 'Diagonal'))
    g.add_argument('--iterations', type=int, help='CLAIR outer iterations')
    g.add_argument('--build-r-from', choices=('PTranspose', 'TransposeOfA'))
    g.add_argument('--no-constrain', action='store_true')
    g.add_argument('--second-pass', action=argparse.BooleanOptionalAction, default=None)
    g.add_argument('--drop-tol', type=float)
    g.add_argument('--filter', dest='filter_coarse', action=argparse.BooleanOptionalAction,
                   default=None)
    g.add_argument('--r-degree', type=int)
    g.add_argument('--r-theta', type=float)
    g.add_argument('--max-levels', type=int)
    g.add_argument('--max-coarse', type=int)
    g.add_argument('--prescale', action=argparse.BooleanOptionalAction, default=None)
    k = p.add_argument_group('krylov')
    k.add_argument('--krylov', choices=('CG', 'GMRES'))
    k.add_argument('--rel-tol', type=float)
    k.add_argument('--abs-tol', type=float)
    k.add_argument('--max-iters', type=int)
    k.add_argument('--restart', type=int)
    k.add_argument('--tolerance-mode', choices=('relative', 'scaled_absolute'))
    p.add_argument('--seed', type=int)


def _pick(args, names):
    return {k: getattr(args, k) for k in names if getattr(args, k, None) is not None}


def manifest_from_args(args):
    if getattr(args, 'manifest', None):
        with open(args.manifest) as fh:
            m = RunManifest.from_json(fh.read())
    else:
        m = RunManifest()
    prob = _pick(args, ('kind', 'alpha', 'epsilon', 'phi', 'd_high'))
    if args.n:
        prob['n'] = tuple(args.n)
    if prob:
        if 'kind' in prob and not args.n and prob['kind'] != m.problem.kind:
            prob.setdefault('n', m.problem.n)
        m = replace(m, problem=ProblemSpec(**{**m.problem.to_dict(), **prob}))
    sym = is_symmetric_kind(m.problem.kind)
    if getattr(args, 'preset', None):
        m = replace(m, solver=preset_config(args.preset, sym),
                    krylov=replace(m.krylov, method='CG' if sym else 'GMRES'))
    solver = getattr(args, 'method', None) and {'method': args.method} or {}
    solver.update(_pick(args, ('coarsen_theta', 'second_pass', 'drop_tol', 'filter_coarse',
                               'r_degree', 'r_theta', 'max_levels', 'max_coarse', 'prescale')))
    tr = {'coarsen_type': args.coarsen_type, 'degree': args.degree,
          'interp_theta': args.interp_theta, 'smoothing_steps': args.smoothing_steps,
          'inverse': args.inverse, 'iterations': args.iterations,
          'build_R_from': args.build_r_from}
    tr = {k: v for k, v in tr.items() if v is not None}
    if args.no_constrain:
        tr['constrain'] = False
    if tr:
        solver['transfer'] = replace(m.solver.transfer, **tr)
    if solver:
        m = replace(m, solver=replace(m.solver, **solver))
    kry = {'method': args.krylov} if args.krylov else {}
    kry.update(_pick(args, ('rel_tol', 'abs_tol', 'max_iters', 'restart')))
    if kry:
        m = replace(m, krylov=replace(m.krylov, **kry))
    if args.seed is not None:
        m = replace(m, seed=args.seed)
    if args.tolerance_mode:
        m = replace(m, tolerance_mode=args.tolerance_mode)
    return m


def _parse_axis(text):
    name, _, values = text.partition('=')
    if not values:
        raise argparse.ArgumentTypeError(f'axis must look like name=v1,v2,..., got {text!r}')
    vals = [v for v in values.split(',') if v]
    if name not in ('preset',):
        vals = [float(v) if name != 'n' and name != 'seed' else int(v) for v in vals]
    return name, vals


def build_parser():
    parser = argparse.ArgumentParser(prog='airamg', description=__doc__.splitlines()[0])
    parser.add_argument('-v', '--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('solve', help='set up and solve one problem')
    p.add_argument('--manifest', help='JSON run manifest')
    p.add_argument('--out-dir', default='.', help='where the report and residual CSV go')
    p.add_argument('--write-manifest', help='save the merged manifest here')
    p.add_argument('--export-transfers', help='directory for P/R Matrix Market files')
    p.add_argument('--timing', action='store_true', help='include wall times in the report')
    _add_problem_args(p)
    _add_solver_args(p)

    p = sub.add_parser('sweep', help='cartesian parameter sweep')
    p.add_argument('--manifest', help='template manifest')
    p.add_argument('--axis', type=_parse_axis, action='append', required=True,
                   help="e.g. --axis alpha=10,1,0.1 --axis preset=clair,lair")
    p.add_argument('--out', default='sweep.csv')
    _add_problem_args(p)
    _add_solver_args(p)

    p = sub.add_parser('problems', help='test problem utilities')
    psub = p.add_subparsers(dest='problems_command', required=True)
    e = psub.add_parser('emit', help='write a problem matrix in Matrix Market format')
    e.add_argument('--out', required=True)
    e.add_argument('--prescale', action='store_true')
    _add_problem_args(e)

    p = sub.add_parser('analyze-fap', help='WAP/SAP constants of level-0 restrictions')
    p.add_argument('--presets', nargs='+', default=['clair', 'lair'], choices=PRESETS)
    p.add_argument('--out-prefix', default='fap')
    _add_problem_args(p)
    return parser


def _problem_only(args):
    base = ProblemSpec()
    prob = _pick(args, ('kind', 'alpha', 'epsilon', 'phi', 'd_high'))
    if args.n:
        prob['n'] = tuple(args.n)
    return ProblemSpec(**{**base.to_dict(), **prob})


def cmd_solve(args):
    m = manifest_from_args(args)
    os.makedirs(args.out_dir, exist_ok=True)
    report_path = m.outputs.get('report') or os.path.join(args.out_dir, 'report.json')
    resid_path = m.outputs.get('residuals') or os.path.join(args.out_dir, 'residuals.csv')
    if args.write_manifest:
        with open(args.write_manifest, 'w') as fh:
            fh.write(m.to_json())
    report, rep, H = run_benchmark(m, timing=args.timing)
    with open(report_path, 'w') as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    write_residuals(resid_path, rep)
    if args.export_transfers:
        export_transfers(args.export_transfers, H, m)
    print(f"{report['method']}/{report['coarsening']} n={report['n']} "
          f"iterations={report['iterations']} status={report['status']} "
          f"gamma={report['gamma']:.3f} OC={report['operator_complexity']:.3f} "
          f"wpd={report['work_per_digit']:.2f}")
    return 0 if rep.converged else 2


def cmd_sweep(args):
    m = manifest_from_args(args)
    rows = run_sweep(m, dict(args.axis), args.out)
    for r in rows:
        print(f"{r['axis']:<40} {r['status']:<10} it={r['iterations']} "
              f"OC={r['operator_complexity']}")
    return 0


def cmd_emit(args):
    spec = _problem_only(args)
    A, block = build_problem(spec)
    if args.prescale:
        A = block_diag_prescale(A, block)
    mmwrite(args.out, A)
    with open(args.out + '.json', 'w') as fh:
        json.dump({'problem': spec.to_dict(), 'h': grid_spacing(spec), 'prescaled': args.prescale,
                   'shape': list(A.shape), 'nnz': int(A.nnz)}, fh, sort_keys=True)
    print(f'wrote {args.out} ({A.shape[0]} rows, {A.nnz} nonzeros)')
    return 0


def cmd_fap(args):
    spec = _problem_only(args)
    A, block = build_problem(spec)
    sym = is_symmetric_kind(spec.kind)
    summary = {'problem': spec.to_dict()}
    for name in args.presets:
        cfg = preset_config(name, sym)
        Am = block_diag_prescale(A, block) if cfg.prescale else A
        H = setup(Am, cfg)
        if H.n_levels < 2:
            raise SystemExit(f'{name}: hierarchy has a single level, nothing to analyse')
        results = approximation_report(Am, R=H.levels[0].R)
        write_report_csv(f'{args.out_prefix}_{name}.csv', results)
        summary[name] = report_summary(results)
        print(name, ' '.join(f"{k}: K_max={v['k_max']:.4g}" for k, v in summary[name].items()))
    with open(f'{args.out_prefix}_summary.json', 'w') as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(message)s')
    try:
        if args.command == 'solve':
            return cmd_solve(args)
        if args.command == 'sweep':
            return cmd_sweep(args)
        if args.command == 'problems':
            return cmd_emit(args)
        return cmd_fap(args)
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return 1
