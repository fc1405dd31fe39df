from typing import Any, Dict, List, Optional, Sequence
from argparse import ArgumentParser, Namespace
from dataclasses import fields
from datetime import datetime
from os.path import dirname, basename, exists
from logging import basicConfig, getLogger
from json import dumps
import numpy as np

from SALE import __version__
from SALE.kernel.errors import ConfigError, NumericalError, VerificationError, SALEError
from SALE.bench.config import LOG_LEVELS, RunConfig, parse_config, parse_triple
from SALE.bench.harness import run_simulation, emit_report, store_report, run_scaling_suite, calls_per_cycle
from SALE.bench.oracles import (solve_riemann, sedov_constant, sedov_shock_radius, sedov_profile, noh_exact,
                                noh_shock_position)
from SALE.bench.storage import RecordDatabase

logger = getLogger('SALE.bench')

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VERIFICATION = 4


def open_database(path: Optional[str], keep_existing: bool = False) -> Optional[RecordDatabase]:
    """
    Record database at the given path: a new file, or the existing one when keep_existing is set.
    """

    if path is None:
        return None
    database = RecordDatabase(database_dir=dirname(path), database_name=basename(path))
    if keep_existing and exists(database.path):
        return database.load()
    return database.new(remove_existing=True)


def _config_flags(args: Namespace) -> Dict[str, Any]:
    return {f.name: getattr(args, f.name, None) for f in fields(RunConfig)}


def _int_list(key: str, text: str) -> List[int]:
    try:
        return [int(n) for n in text.replace(' ', '').split(',') if n]
    except ValueError as error:
        raise ConfigError(key, f"Expected a comma separated list of integers, got '{text}'.") from error


def _floats(key: str, text: str, count: int) -> List[float]:
    try:
        values = [float(v) for v in text.split(',')]
    except ValueError as error:
        raise ConfigError(key, f"Expected {count} comma separated numbers, got '{text}'.") from error
    if len(values) != count:
        raise ConfigError(key, f"Expected {count} comma separated numbers, got '{text}'.")
    return values


def _set_level(level: str) -> None:
    getLogger('SALE').setLevel(level.upper())


def run_command(args: Namespace) -> int:

    config = parse_config(args.config, _config_flags(args))
    _set_level(config.log_level)
    report = run_simulation(config)
    if report is None:
        return 0
    database = open_database(config.database)
    try:
        if config.out is not None:
            emit_report(report, config.out, database)
        elif database is not None:
            store_report(report, database)
        if database is not None:
            database.print_architecture()
    finally:
        if database is not None:
            database.close()
    for v in report.verification:
        logger.info(f"{v.name}: {v.error:.6e} (tolerance {v.tolerance:.3e}, {'passed' if v.passed else 'failed'})")
    if config.verify:
        report.check()
    return 0


def scale_command(args: Namespace) -> int:

    config = parse_config(args.config, _config_flags(args))
    _set_level(config.log_level)
    per_rank = parse_triple('per_rank', args.per_rank) if args.per_rank is not None else None
    database = open_database(config.database)
    try:
        rows = run_scaling_suite(config, args.mode, _int_list('ranks_list', args.ranks_list), path=config.out,
                                 per_rank=per_rank, database=database)
    finally:
        if database is not None:
            database.close()
    expected = calls_per_cycle(config.rezone, config.materials, config.strength)
    print(f"\n{args.mode.upper()} SCALING ({config.problem}, {config.rezone}, {expected} calls per cycle expected)")
    for row in rows:
        print(f"  - {row['ranks']:>4} ranks  {row['cells_x']}x{row['cells_y']}x{row['cells_z']} cells  "
              f"{row['wall_s']:.3f} s  efficiency {row['efficiency']:.3f}"
              f"{'  (oversubscribed)' if row['oversubscribed'] else ''}")
    return 0


def _golden_line(oracle: str, parameters: Dict[str, Any], profiles: Dict[str, np.ndarray]) -> Dict[str, Any]:

    line = {'oracle': oracle,
            'parameters': dumps(parameters, sort_keys=True),
            'provenance': f"SALE {__version__} oracle '{oracle}'",
            'created': datetime.now()}
    line.update({name: np.asarray(values, dtype=float) for name, values in profiles.items()})
    return line


def oracle_command(args: Namespace) -> int:
    """
    Sample an oracle on a regular grid and store the profile, with its parameters, in the Golden table.
    """

    x = np.linspace(0., args.length, args.points)
    if args.oracle == 'riemann':
        left, right = _floats('left', args.left, 3), _floats('right', args.right, 3)
        solution = solve_riemann(tuple(left), tuple(right), args.gamma)
        rho, u, p = solution.sample((x - args.split * args.length) / args.t)
        parameters = {'left': left, 'right': right, 'gamma': args.gamma, 't': args.t, 'split': args.split,
                      'p_star': solution.p_star, 'u_star': solution.u_star}
        logger.info(f"Riemann star state: p* = {solution.p_star:.10f}, u* = {solution.u_star:.10f} "
                    f"({solution.left_wave} / {solution.right_wave})")
    elif args.oracle == 'sedov':
        rho, u, p = sedov_profile(args.energy, args.density, args.gamma, args.t, x)
        radius = sedov_shock_radius(args.energy, args.density, args.gamma, args.t)
        parameters = {'energy': args.energy, 'density': args.density, 'gamma': args.gamma, 't': args.t,
                      'xi0': sedov_constant(args.gamma), 'radius': radius}
        logger.info(f"Sedov shock radius R = {radius:.10f} (xi0 = {parameters['xi0']:.10f})")
    else:
        rho, u, p = noh_exact(args.density, args.gamma, args.t, x, inflow_speed=args.inflow_speed)
        parameters = {'density': args.density, 'gamma': args.gamma, 't': args.t, 'inflow_speed': args.inflow_speed,
                      'shock': noh_shock_position(args.gamma, args.t, args.inflow_speed)}
        logger.info(f"Noh shock position x_s = {parameters['shock']:.10f}")

    database = open_database(args.database, keep_existing=True)
    try:
        line = database.add_data('Golden', _golden_line(args.oracle, parameters,
                                                        {'x': x, 'density': rho, 'velocity': u, 'pressure': p}))
        if args.json is not None:
            database.export_json('Golden', args.json)
        database.print_architecture()
    finally:
        database.close()
    logger.info(f"Stored the {args.oracle} profile as line {line} of {database.path}")
    return 0


def _add_config_arguments(parser: ArgumentParser) -> None:

    parser.add_argument('--config', type=str, default=None, help='flat key = value configuration file.', metavar='')
    parser.add_argument('--problem', type=str, choices=['sedov', 'sod', 'noh'], default=None)
    parser.add_argument('--rezone', type=str, choices=['lagrange', 'euler'], default=None)
    parser.add_argument('--cells', type=str, default=None, help='global cells, NX,NY,NZ.', metavar='')
    parser.add_argument('--ranks', type=str, default=None, help='ranks per axis, PX,PY,PZ.', metavar='')
    parser.add_argument('--cycles', type=str, default=None, help='cycle limit.', metavar='')
    parser.add_argument('--t-end', dest='t_end', type=str, default=None, help='end time.', metavar='')
    parser.add_argument('--cfl', type=str, default=None, help='Courant number.', metavar='')
    parser.add_argument('--backend', type=str, choices=['inprocess', 'multiprocess'], default=None)
    parser.add_argument('--exchange', type=str, choices=['nonblocking', 'blocking'], default=None)
    parser.add_argument('--materials', type=str, default=None, help='number of materials (sod only).', metavar='')
    parser.add_argument('--gamma', type=str, default=None, help='adiabatic index.', metavar='')
    parser.add_argument('--energy', type=str, default=None, help='Sedov deposited energy.', metavar='')
    parser.add_argument('--density', type=str, default=None, help='Sedov and Noh density.', metavar='')
    parser.add_argument('--split', type=str, default=None, help='Sod membrane position.', metavar='')
    parser.add_argument('--inflow-speed', dest='inflow_speed', type=str, default=None, help='Noh inflow speed.',
                        metavar='')
    parser.add_argument('--strength', action='store_true', default=None, help='Steinberg strength diagnostics.')
    parser.add_argument('--verify', action='store_true', default=None, help='compare with the oracles.')
    parser.add_argument('--out', type=str, default=None, help='CSV report path.', metavar='')
    parser.add_argument('--database', type=str, default=None, help='record database path.', metavar='')
    parser.add_argument('--delay-ms', dest='delay_ms', type=str, default=None, help='in-process message delay.',
                        metavar='')
    parser.add_argument('--log-level', dest='log_level', type=str, default=None, metavar='',
                        help='DEBUG, INFO, WARNING or ERROR.')


def build_parser() -> ArgumentParser:

    description = "Command Line Interface of the SALE hydrodynamics mini-benchmark."
    parser = ArgumentParser(prog='SALE', description=description)
    parser.add_argument('--version', action='version', version=f'SALE {__version__}')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='run one simulation and write its cycle report.')
    _add_config_arguments(run)
    run.set_defaults(handler=run_command)

    scale = commands.add_parser('scale', help='run a strong or weak scaling series.')
    _add_config_arguments(scale)
    scale.add_argument('--mode', type=str, choices=['strong', 'weak'], required=True)
    scale.add_argument('--ranks-list', dest='ranks_list', type=str, default='1,8', help='rank counts, 1,8,27.',
                       metavar='')
    scale.add_argument('--per-rank', dest='per_rank', type=str, default=None,
                       help='cells per rank of the weak series, the run cells by default.', metavar='')
    scale.set_defaults(handler=scale_command)

    oracle = commands.add_parser('oracle', help='regenerate a golden profile.')
    oracle.add_argument('oracle', type=str, choices=['riemann', 'sedov', 'noh'])
    oracle.add_argument('--t', type=float, default=None, help='sampling time.', metavar='')
    oracle.add_argument('--gamma', type=float, default=None, help='adiabatic index.', metavar='')
    oracle.add_argument('--left', type=str, default='1,0,1', help='left density,velocity,pressure.', metavar='')
    oracle.add_argument('--right', type=str, default='0.125,0,0.1', help='right density,velocity,pressure.',
                        metavar='')
    oracle.add_argument('--split', type=float, default=0.5, help='membrane position.', metavar='')
    oracle.add_argument('--energy', type=float, default=1., help='blast energy.', metavar='')
    oracle.add_argument('--density', type=float, default=1., help='ambient density.', metavar='')
    oracle.add_argument('--inflow-speed', dest='inflow_speed', type=float, default=1., metavar='')
    oracle.add_argument('--length', type=float, default=1., help='sampled extent.', metavar='')
    oracle.add_argument('--points', type=int, default=401, help='number of samples.', metavar='')
    oracle.add_argument('--database', type=str, default='golden.db', help='record database path.', metavar='')
    oracle.add_argument('--json', type=str, default=None, help='JSON export of the Golden table.', metavar='')
    oracle.add_argument('--log-level', dest='log_level', type=str, default=None, metavar='')
    oracle.set_defaults(handler=oracle_command)
    return parser


_ORACLE_DEFAULTS = {'riemann': {'t': 0.2, 'gamma': 1.4},
                    'sedov': {'t': 1., 'gamma': 1.4},
                    'noh': {'t': 0.6, 'gamma': 5. / 3.}}


def execute_cli(argv: Optional[Sequence[str]] = None) -> int:

    args = build_parser().parse_args(argv)
    basicConfig(format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    _set_level(args.log_level if str(args.log_level).upper() in LOG_LEVELS else 'INFO')
    if args.command == 'oracle':
        for key, value in _ORACLE_DEFAULTS[args.oracle].items():
            if getattr(args, key) is None:
                setattr(args, key, value)

    try:
        return args.handler(args)
    except ConfigError as error:
        logger.error(f"Configuration error: {error}")
        return EXIT_CONFIG
    except NumericalError as error:
        logger.error(f"Numerical failure at cycle {error.cycle}: {error}")
        return EXIT_NUMERICAL
    except VerificationError as error:
        logger.error(f"Verification failed: {error} {error.metrics}")
        return EXIT_VERIFICATION
    except SALEError as error:
        logger.error(f"{type(error).__name__}: {error}")
        return 1
