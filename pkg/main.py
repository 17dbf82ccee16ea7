"""
Main Application - Quartet

Command-line entry point: validates parameters, samples instanton
trajectories, tabulates fluctuation determinants, compares semiclassical
splittings with the grid eigensolver, traces tunneling probabilities and
maps the composite molecule onto the four-well model.

Every command writes plot data (CSV or JSON) into --out and is recorded
in the run ledger.
"""

import argparse
import json
import logging
import math
import os
import sys
from functools import partial
from typing import Dict, List, Optional

from dotenv import load_dotenv

# ── Absolute base directory so the CLI works regardless of where it's launched ──
BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# Add src to path
sys.path.append(os.path.join(BASE_DIR, 'src'))

load_dotenv(os.path.join(BASE_DIR, '.env'))

# ── Logging setup ──────────────────────────────────────────────────────────────
# Reads QUARTET_LOG_LEVEL (env or .env, default INFO)
_log_level_name = os.environ.get('QUARTET_LOG_LEVEL', 'INFO').upper()
_log_level = getattr(logging, _log_level_name, logging.INFO)
if not isinstance(_log_level, int):
    _log_level = logging.INFO

logging.basicConfig(
    level=_log_level,
    format='%(asctime)s [%(levelname)s] %(message)s',
    datefmt='%H:%M:%S'
)
logger = logging.getLogger('quartet')


def qlog(msg: str, level: str = 'info'):
    """Quartet logger shorthand. level: debug/info/warning/error"""
    getattr(logger, level)(msg)


from core.classical import (Flavor, action, diagonal_trajectory, edge_trajectory, eom_residual,
                            lagrangian_action, make_grid, solve_bvp)
from core.composite import (MoleculeParams, effective_couplings, nonrigid_effective_potential,
                            rigid_effective_potential, to_system_params)
from core.errors import DomainError, NumericalError, QuartetError
from core.fluctuations import MELTING_WINDOW, determinant_record, melting_fit
from core.gas import InstantonWeights, lifetime, probability_trace, spectrum
from core.model import (EqualParams, SystemParams, classify_critical_points, harmonic_frequencies,
                        validate_params)
from core.schrodinger import Grid2D, splitting_row
from database.schema import DatabaseSchema
from services.eigen_cache import EigenCache
from services.export import write_json, write_table
from services.run_config import RunConfig, default_config_path, load_config, parse_range
from services.run_log import RunLog
from services.sweeps import guarded, parallel_map

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_NUMERICAL = 2

MELTING_EPS = (1e-2, 4e-3, 1e-3)
TRAJECTORY_COLUMNS = ('tau', 'p', 'q', 'dp', 'dq')
DETERMINANT_COLUMNS = ('mu', 'method', 'chi_L_R', 'chi_T_R', 'chi_L_P', 'chi_T_P')
SPLITTING_COLUMNS = ('lambda', 'mu', 'dE_P_semi', 'dE_P_num', 'dE_R_semi', 'dE_R_num',
                     'dev_P', 'dev_R', 'ratio_num', 'flag')
PROBABILITY_COLUMNS = ('t', 'P_a', 'P_b', 'P_c', 'P_d')


# ── Shared helpers ─────────────────────────────────────────────────────

def resolve_path(path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(BASE_DIR, path)


def open_database(run: RunConfig) -> Optional[DatabaseSchema]:
    db_path = resolve_path(run.section('cache').get('db_path', 'data/databases/quartet.db'))
    try:
        db = DatabaseSchema(db_path=db_path)
        db.connect()
        db.initialize_schema()
        return db
    except Exception as e:
        print(f"⚠️  Run ledger unavailable ({db_path}): {e}")
        return None


def system_from_args(args) -> SystemParams:
    if getattr(args, 'params', None):
        with open(args.params, 'r') as f:
            data = json.load(f)
        if isinstance(data, dict) and 'system' in data:
            data = data['system']
        return SystemParams.from_dict(data)
    return SystemParams(a_p=args.ap, a_q=args.aq, b_p=args.bp, b_q=args.bq, c=args.c)


def molecule_from_args(args) -> MoleculeParams:
    if args.molecule:
        with open(args.molecule, 'r') as f:
            return MoleculeParams.from_dict(json.load(f))
    missing = [k for k in ('m', 'omega', 'Omega', 'a', 'L') if getattr(args, k) is None]
    if missing:
        raise DomainError(f"molecule parameters missing: {missing} (or pass --molecule FILE)", missing)
    return MoleculeParams(m=args.m, omega=args.omega, Omega=args.Omega, a=args.a, L=args.L)


# ── Commands ───────────────────────────────────────────────────────────

def cmd_validate(run: RunConfig, args) -> Dict:
    """Validity report plus the nine critical points."""
    params = system_from_args(args)
    report = validate_params(params)
    out_dir = run.ensure_output_dir()
    if not report.four_well:
        write_json(os.path.join(out_dir, 'validate.json'),
                   {'params': params.to_dict(), 'report': report.to_dict(), 'critical_points': []})
        raise DomainError(f"parameters violate four-well conditions {report.violated}", report.violated)

    points = classify_critical_points(params)
    w_plus, w_minus = harmonic_frequencies(params)
    print(f"✓ Four-well region: mu={params.mu:.6g} nu={params.nu:.6g} "
          f"omega+={w_plus:.6g} omega-={w_minus:.6g}")
    for point in points:
        p, q = point.location
        print(f"  {point.kind.value:<13} ({p:+.6f}, {q:+.6f})  V={point.value:.10g}")
    rows = [pt.to_dict() for pt in points]
    write_table(out_dir, 'critical_points', rows, fmt=run.output_format,
                columns=('p', 'q', 'kind', 'value'))
    write_json(os.path.join(out_dir, 'validate.json'),
               {'params': params.to_dict(), 'report': report.to_dict(), 'critical_points': rows,
                'omega_plus': w_plus, 'omega_minus': w_minus})
    return {'four_well': True, 'points': len(points)}


def cmd_trajectory(run: RunConfig, args) -> Dict:
    eq = EqualParams(lam=args.lam, mu=args.mu)
    section = run.section('trajectory')
    half_span = args.half_span if args.half_span is not None else section['half_span']
    n = args.n if args.n is not None else section['n']
    flavor = Flavor(args.flavor)

    if args.solve:
        tau_span = half_span / min(harmonic_frequencies(eq.to_system()))
        traj = solve_bvp(eq.to_system(), flavor, grid=make_grid(tau_span, n))
    elif flavor is Flavor.R:
        traj = diagonal_trajectory(eq, half_span=half_span, n=n)
    else:
        traj = edge_trajectory(eq, half_span=half_span, n=n, flavor=flavor)

    if traj.perturbative:
        s0 = lagrangian_action(traj, traj.params)
    else:
        s0 = action(traj, traj.params)
    residual = eom_residual(traj, traj.params)
    rows = [{'tau': t, 'p': p, 'q': q, 'dp': dp, 'dq': dq}
            for t, p, q, dp, dq in zip(traj.tau, traj.p, traj.q, traj.dp, traj.dq)]
    header = {'flavor': flavor.value, 'lambda': eq.lam, 'mu': eq.mu, 'action': s0,
              'eom_residual': residual, 'perturbative': traj.perturbative}
    path = write_table(run.ensure_output_dir(), f"trajectory_{flavor.value}", rows,
                       fmt=run.output_format, columns=TRAJECTORY_COLUMNS, header=header)
    print(f"✓ {flavor.value} trajectory: S0={s0:.12g}, EOM residual {residual:.2e} -> {path}")
    return {'flavor': flavor.value, 'action': s0, 'points': len(rows)}


def determinant_row(mu: float, cross: bool, half_span: float, n: int) -> Dict:
    row = determinant_record(mu, method='closed')
    if cross:
        numeric = determinant_record(mu, method='numeric', half_span=half_span, n=n)
        worst = 0.0
        for key in ('chi_L_R', 'chi_T_R', 'chi_L_P', 'chi_T_P'):
            row[f"{key}_gy"] = numeric[key]
            a, b = row[key], numeric[key]
            if isinstance(a, float) and isinstance(b, float) and a != 0:
                worst = max(worst, abs(a - b) / abs(a))
        row['cross_rel'] = worst
    return row


def cmd_determinants(run: RunConfig, args) -> Dict:
    """chi ratios over a mu range, with the melting fit when the range nears -1/2."""
    mus = parse_range(args.mu)
    section = run.section('fluctuations')
    work = partial(determinant_row, cross=args.cross, half_span=section['half_span'], n=section['n'])
    rows = parallel_map(lambda mu: {'mu': mu, **guarded(work, mu)}, mus, workers=run.workers)

    columns = list(DETERMINANT_COLUMNS)
    if args.cross:
        columns += ['chi_L_R_gy', 'chi_T_R_gy', 'chi_L_P_gy', 'chi_T_P_gy', 'cross_rel']
    if any('error' in r for r in rows):
        columns.append('error')

    header: Dict = {}
    summary: Dict = {'rows': len(rows)}
    if min(mus) <= -0.5 + MELTING_WINDOW:
        fit = melting_fit(MELTING_EPS)
        header = {'melting_coefficient': fit.coefficient, 'melting_expected': 4.0 * math.log(2.0)}
        write_json(os.path.join(run.ensure_output_dir(), 'melting_fit.json'), fit.to_dict())
        summary['melting_coefficient'] = fit.coefficient
        print(f"✓ Melting fit: ln chi_T ~ {fit.coefficient:.6f}/sqrt(eps) "
              f"(4 ln 2 = {4.0 * math.log(2.0):.6f}, off by {fit.relative_error:.2%})")

    path = write_table(run.ensure_output_dir(), 'determinants', rows, fmt=run.output_format,
                       columns=columns, header=header)
    poles = sum(1 for r in rows if r.get('chi_T_R') == 'pole')
    print(f"✓ {len(rows)} determinant rows ({poles} at a pole) -> {path}")
    return summary


def cmd_splittings(run: RunConfig, args, cache: Optional[EigenCache] = None) -> Dict:
    """Semiclassical vs grid splittings over lambda, plus the figure's plot data."""
    lambdas = parse_range(args.lam)
    section = run.section('schrodinger')
    grid = Grid2D(extent=args.extent if args.extent is not None else section['extent'],
                  n=args.n if args.n is not None else section['n'])
    solver = cache.sector_levels if cache is not None else None

    rows = parallel_map(lambda lam: splitting_row(args.mu, lam, grid, seed=run.seed, solver=solver),
                        lambdas, workers=run.workers, grid_points=grid.n)
    out_dir = run.ensure_output_dir()
    path = write_table(out_dir, 'splittings', rows, fmt=run.output_format, columns=SPLITTING_COLUMNS,
                       header={'mu': args.mu, 'extent': grid.extent, 'n': grid.n})

    figure = 'negmu' if args.mu < 0 else 'posmu'
    plot = [{'lambda': r['lambda'], 'dE_P_semi': r['dE_P_semi'], 'dE_P_num': r['dE_P_num'],
             'dE_R_semi': r['dE_R_semi'], 'dE_R_num': r['dE_R_num']} for r in rows]
    write_table(out_dir, f"plot_{figure}", plot, fmt=run.output_format)

    flagged = sum(1 for r in rows if r['flag'])
    status = '⚠️ ' if flagged else '✓'
    print(f"{status} {len(rows)} splitting rows at mu={args.mu} ({flagged} flagged) -> {path}")
    if cache is not None:
        qlog(f"eigen cache: {cache.hits} hits, {cache.misses} misses", 'debug')
    return {'rows': len(rows), 'flagged': flagged}


def cmd_probabilities(run: RunConfig, args) -> Dict:
    eq = EqualParams(lam=args.lam, mu=args.mu)
    weights = InstantonWeights.build(eq)
    tau = lifetime(weights)
    times = parse_range(args.t) if args.t else parse_range(f"0:{2.0 * tau!r}:201")
    rows = probability_trace(weights, times)
    header = {'lambda': eq.lam, 'mu': eq.mu, 'K': weights.K, 'K_R': weights.K_R, 'lifetime': tau}
    path = write_table(run.ensure_output_dir(), 'probabilities', rows, fmt=run.output_format,
                       columns=PROBABILITY_COLUMNS, header=header)
    spec = spectrum(weights)
    print(f"✓ Probability trace: lifetime={tau:.6g}, dE_P={spec.dE_P:.6g}, dE_R={spec.dE_R:.6g} -> {path}")
    return {'lifetime': tau, 'rows': len(rows)}


def cmd_composite(run: RunConfig, args) -> Dict:
    mol = molecule_from_args(args)
    eq = nonrigid_effective_potential(mol)
    system = to_system_params(eq, hbar=args.hbar)
    mu, nu, equal = effective_couplings(system)
    report = validate_params(system)

    payload = {'molecule': mol.to_dict(), 'effective': eq.to_dict(), 'system': system.to_dict(),
               'report': report.to_dict(), 'mu': mu, 'nu': nu, 'equal': equal}
    if mol.L < mol.rigid_bond_limit:
        y0, offset = rigid_effective_potential(mol.m, mol.omega, mol.a, mol.L)
        payload['rigid'] = {'y0': y0, 'K': offset}
    path = write_json(os.path.join(run.ensure_output_dir(), 'composite.json'), payload)

    status = '✓' if report.four_well else '⚠️ '
    print(f"{status} Composite mapping: x0={eq.x0:.6g} y0={eq.y0:.6g} mu={mu:.6g} nu={nu:.6g} -> {path}")
    return {'mu': mu, 'nu': nu, 'four_well': report.four_well}


# ── Argument parsing ───────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='quartet',
                                     description='Semiclassical four-well instanton toolkit')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--format', choices=('csv', 'json'), help='table format')
    parser.add_argument('--seed', type=int, help='eigensolver start-vector seed')
    parser.add_argument('--config', help='alternate JSON config')
    parser.add_argument('--workers', type=int, help='sweep workers (0 = auto)')
    parser.add_argument('--no-cache', action='store_true', help='bypass the eigenvalue cache')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('validate', help='four-well check and critical points')
    p.add_argument('--params', help='JSON SystemParams (or composite output)')
    p.add_argument('--ap', type=float, default=1.0)
    p.add_argument('--aq', type=float, default=1.0)
    p.add_argument('--bp', type=float, default=1.0)
    p.add_argument('--bq', type=float, default=1.0)
    p.add_argument('--c', type=float, default=0.0)

    p = sub.add_parser('trajectory', help='sample an instanton path')
    p.add_argument('--flavor', choices=[f.value for f in Flavor], default='R')
    p.add_argument('--lam', '--lambda', dest='lam', type=float, default=10.0)
    p.add_argument('--mu', type=float, default=-0.2)
    p.add_argument('--half-span', type=float)
    p.add_argument('--n', type=int)
    p.add_argument('--solve', action='store_true', help='relax the path with the BVP solver')

    p = sub.add_parser('determinants', help='chi ratios over a mu range')
    p.add_argument('--mu', default='-0.45:-0.05:9', help='start:stop:count or a comma list')
    p.add_argument('--cross', action='store_true', help='add Gelfand-Yaglom columns')

    p = sub.add_parser('splittings', help='semiclassical vs grid splittings')
    p.add_argument('--mu', type=float, required=True)
    p.add_argument('--lambda', dest='lam', default='4:12:9')
    p.add_argument('--extent', type=float)
    p.add_argument('--n', type=int)

    p = sub.add_parser('probabilities', help='real-time survival probabilities')
    p.add_argument('--lam', '--lambda', dest='lam', type=float, required=True)
    p.add_argument('--mu', type=float, required=True)
    p.add_argument('--t', help='time range start:stop:count (default 0 .. 2 lifetimes)')

    p = sub.add_parser('composite', help='map a diatomic molecule onto the model')
    p.add_argument('--molecule', help='JSON MoleculeParams')
    for name in ('m', 'omega', 'Omega', 'a', 'L'):
        p.add_argument(f"--{name}", type=float)
    p.add_argument('--hbar', type=float, default=1.0)
    return parser


COMMANDS = {
    'validate': cmd_validate,
    'trajectory': cmd_trajectory,
    'determinants': cmd_determinants,
    'probabilities': cmd_probabilities,
    'composite': cmd_composite,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config_path = args.config or os.environ.get('QUARTET_CONFIG') or default_config_path(BASE_DIR)
    workers = args.workers
    if workers is None and os.environ.get('QUARTET_WORKERS'):
        workers = int(os.environ['QUARTET_WORKERS'])

    params = {k: v for k, v in vars(args).items()
              if k not in ('out', 'format', 'seed', 'config', 'workers', 'no_cache', 'command')}
    try:
        settings = load_config(resolve_path(config_path))
        run = RunConfig.from_args(args.command, params, settings, out=args.out, fmt=args.format,
                                  seed=args.seed, workers=workers)
    except DomainError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_DOMAIN
    run.output_dir = resolve_path(run.output_dir)

    db = open_database(run)
    ledger = RunLog(db.get_connection()) if db else None
    run_id = ledger.start_run(run.command, run.to_dict(), run.output_dir) if ledger else None

    try:
        if run.command == 'splittings':
            use_cache = db is not None and run.section('cache').get('enabled', True) and not args.no_cache
            summary = cmd_splittings(run, args, EigenCache(db.get_connection()) if use_cache else None)
        else:
            summary = COMMANDS[run.command](run, args)
        status, code = 'ok', EXIT_OK
    except DomainError as e:
        print(f"❌ {e}", file=sys.stderr)
        summary, status, code = {'error': str(e), 'conditions': e.conditions}, 'domain_error', EXIT_DOMAIN
    except (NumericalError, QuartetError) as e:
        print(f"❌ {type(e).__name__}: {e}", file=sys.stderr)
        summary, status, code = {'error': str(e)}, 'numerical_error', EXIT_NUMERICAL

    if ledger:
        ledger.finish_run(run_id, status, summary)
    if db:
        db.close()
    return code


if __name__ == '__main__':
    sys.exit(main())
