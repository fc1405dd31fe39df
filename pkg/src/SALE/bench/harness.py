"""
Run orchestration: one worker per rank, per-cycle timing and exchange accounting, verification against the oracles,
CSV reports and strong / weak scaling suites.

Timings exclude the initialization. A cycle row holds the slowest rank's time for that cycle, the exchange calls of
rank 0, the bytes sent per directed neighbor link of each class and the global conservation totals.
"""

from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field, fields
from concurrent.futures import ThreadPoolExecutor, wait
from contextlib import contextmanager
from os import cpu_count
from os.path import abspath
from shutil import rmtree
from tempfile import mkdtemp
from time import perf_counter
from logging import getLogger
import platform
import numpy as np

from SALE import __version__
from SALE.kernel.grid import decompose_domain
from SALE.kernel.topology import CLASSES, build_topology
from SALE.kernel.transport import Transport, make_transport
from SALE.kernel.exchange import Exchanger
from SALE.kernel.errors import ConfigError, NumericalError, TransportError, VerificationError
from SALE.app.state import SimulationState
from SALE.app.problems import initialize
from SALE.app.lagrange import lagrangian_cycle
from SALE.app.rezone import eulerian_cycle
from SALE.bench.config import RunConfig
from SALE.bench.oracles import (SCALING_MODES, AuditTotals, ScalingRecord, conservation_audit, efficiency,
                                riemann_exact, noh_post_shock, noh_shock_position, sedov_shock_radius)
from SALE.bench.storage import RecordDatabase

logger = getLogger('SALE.bench')

CSV_COLUMNS = ('cycle', 't', 'dt', 'wall_ms', 'exchange_calls', 'bytes_face', 'bytes_edge', 'bytes_corner',
               'total_mass', 'total_energy', 'total_momentum_x', 'total_momentum_y', 'total_momentum_z')
SCALING_COLUMNS = ('mode', 'ranks', 'cells_x', 'cells_y', 'cells_z', 'cycles', 'wall_s', 'efficiency',
                   'calls_per_cycle', 'reference_calls_per_cycle', 'oversubscribed')
REFERENCE_CALLS = {'lagrange': 45, 'euler': 60}
END_TOLERANCE = 1e-12

SOD_TOLERANCE = {'lagrange': 0.03, 'euler': 0.06}
NOH_TOLERANCE = 0.05
NOH_WALL_CELLS = 5
NOH_PLATEAU_EXTENT = 0.75
SEDOV_TOLERANCE = 0.1
MASS_TOLERANCE = 1e-12
ENERGY_TOLERANCE = 1e-6


def calls_per_cycle(rezone: str, materials: int = 1, strength: bool = False) -> int:
    """
    Exchange calls of one cycle of the fixed schedule.

    Lagrangian step: one call per material for densities, energies and fractions, then pressure, viscosity, the time
    step reduction, positions and velocities. Strength adds the shear modulus and yield stress of every material.
    The remap adds densities and energies, masses, momentum increments, the remapped densities, energies and
    fractions, and velocities.

    :param rezone: 'lagrange' or 'euler'.
    :param materials: Number of materials.
    :param strength: Whether the strength diagnostics run.
    """

    calls = 3 * materials + 5
    if strength:
        calls += 2 * materials
    if rezone == 'euler':
        calls += 6 * materials + 2
    return calls


def build_metadata() -> Dict[str, str]:
    return {'version': __version__,
            'python': platform.python_version(),
            'numpy': np.__version__,
            'platform': platform.platform()}


@dataclass(frozen=True)
class CycleRecord:
    """
    One row of the cycle report.
    """

    cycle: int
    t: float
    dt: float
    wall_ms: float
    exchange_calls: int
    bytes_face: float
    bytes_edge: float
    bytes_corner: float
    total_mass: float
    total_energy: float
    total_momentum_x: float
    total_momentum_y: float
    total_momentum_z: float

    def as_row(self) -> Tuple[Any, ...]:
        return tuple(getattr(self, name) for name in CSV_COLUMNS)


@dataclass(frozen=True)
class Verification:
    """
    Error of one oracle comparison against its tolerance. A NaN error never passes.
    """

    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)


@dataclass
class RunReport:
    """
    Result of one run.

    :param config: Effective configuration.
    :param rows: One record per completed cycle.
    :param initial: Conservation totals right after the initialization.
    :param init_time: Initialization time of the slowest rank (seconds), reported apart from the cycle times.
    :param oversubscribed: More ranks than host cores.
    :param verification: Oracle comparisons, empty unless verification was requested.
    :param metadata: Package and build information of the host.
    """

    config: RunConfig
    rows: List[CycleRecord]
    initial: AuditTotals
    init_time: float
    oversubscribed: bool = False
    verification: List[Verification] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=build_metadata)

    @property
    def cycles(self) -> int:
        return len(self.rows)

    @property
    def final_time(self) -> float:
        return self.rows[-1].t if self.rows else 0.

    @property
    def wall_time(self) -> float:
        """
        Total cycle time in seconds, the sum of the per-cycle times.
        """

        return sum(row.wall_ms for row in self.rows) / 1000.

    @property
    def calls_per_cycle(self) -> float:
        return float(np.mean([row.exchange_calls for row in self.rows])) if self.rows else 0.

    @property
    def mass_drift(self) -> float:
        final = self.rows[-1].total_mass if self.rows else self.initial.total_mass
        return abs(final - self.initial.total_mass) / self.initial.total_mass

    @property
    def energy_drift(self) -> float:
        final = self.rows[-1].total_energy if self.rows else self.initial.total_energy
        return abs(final - self.initial.total_energy) / max(abs(self.initial.total_energy), 1e-300)

    @property
    def verified(self) -> bool:
        return all(v.passed for v in self.verification)

    def summary(self) -> Dict[str, Any]:

        summary = {'problem': self.config.problem,
                   'rezone': self.config.rezone,
                   'ranks': self.config.nranks,
                   'cycles': self.cycles,
                   'final_time': self.final_time,
                   'wall_s': self.wall_time,
                   'init_s': self.init_time,
                   'calls_per_cycle': self.calls_per_cycle,
                   'expected_calls_per_cycle': calls_per_cycle(self.config.rezone, self.config.materials,
                                                               self.config.strength),
                   'reference_calls_per_cycle': REFERENCE_CALLS[self.config.rezone],
                   'mass_drift': self.mass_drift,
                   'energy_drift': self.energy_drift,
                   'oversubscribed': self.oversubscribed}
        summary.update(self.metadata)
        for v in self.verification:
            summary[v.name] = v.error
            summary[f'{v.name}_tolerance'] = v.tolerance
        return summary

    def check(self) -> None:
        """
        Raise a VerificationError when an oracle comparison missed its tolerance.
        """

        if failed := [v for v in self.verification if not v.passed]:
            for v in failed:
                logger.warning(f"Verification '{v.name}' failed: error {v.error:.6e} > tolerance {v.tolerance:.3e}")
            raise VerificationError(f"{len(failed)} verification(s) failed: {', '.join(v.name for v in failed)}",
                                    metrics={v.name: (v.error, v.tolerance) for v in failed})


########################################################################################################################
# Verification

def _gather_cells(state: SimulationState) -> Dict[str, np.ndarray]:

    cells = state.cells
    return {'index': np.stack(np.meshgrid(*state.global_cell_indices(), indexing='ij')).reshape(3, -1),
            'centroid': state.centroids().reshape(3, -1),
            'density': state.cell_density()[cells].ravel(),
            'volume': state.volume.data[cells].ravel()}


def _merge_cells(parts: Sequence[Dict[str, np.ndarray]]) -> Dict[str, np.ndarray]:
    return {key: np.concatenate([p[key] for p in parts], axis=-1) for key in parts[0]}


def verify_run(report: RunReport, cells: Dict[str, np.ndarray]) -> List[Verification]:
    """
    Compare the final state with the oracle of its problem and check the conservation of the run.

    :param report: Report of the run.
    :param cells: Global cell arrays: 'index' and 'centroid' (3, N), 'density' and 'volume' (N,).
    """

    config, problem = report.config, report.config.problem_spec()
    t, grid = report.final_time, config.grid
    results = [Verification('mass_drift', report.mass_drift, MASS_TOLERANCE)]
    if config.rezone == 'lagrange' and problem.kind != 'noh':
        results.append(Verification('energy_drift', report.energy_drift,
                                    ENERGY_TOLERANCE * max(1., report.cycles / 20.)))
    if t <= 0.:
        return results
    index, centroid, rho, V = cells['index'], cells['centroid'], cells['density'], cells['volume']
    gamma = problem.gammas[0]

    if problem.kind == 'sod':
        xi = (centroid[0] - problem.split * grid.domain_extent[0]) / t
        left, right = (problem.left[0], 0., problem.left[1]), (problem.right[0], 0., problem.right[1])
        exact, _, _ = riemann_exact(left, right, gamma, xi)
        results.append(Verification('sod_l1_density', float(np.sum(V * np.abs(rho - exact)) / np.sum(V)),
                                    SOD_TOLERANCE[config.rezone]))

    elif problem.kind == 'noh':
        if grid.dimensionality != 1:
            logger.info("The Noh plateau check only applies to planar runs, skipped.")
            return results
        axis = grid.active_axes.index(True)
        shock = noh_shock_position(gamma, t, problem.inflow_speed)
        plateau = noh_post_shock(problem.density, gamma, problem.inflow_speed)[0]
        mask = (index[axis] >= NOH_WALL_CELLS) & (centroid[axis] < NOH_PLATEAU_EXTENT * shock)
        error = abs(float(rho[mask].mean()) - plateau) / plateau if mask.any() else float('nan')
        results.append(Verification('noh_plateau', error, NOH_TOLERANCE))

    else:
        n = grid.cells_per_axis
        if grid.dimensionality != 3 or len(set(n)) != 1:
            logger.info("The Sedov shock position check only applies to cubic 3D runs, skipped.")
            return results
        diagonal = (index[0] == index[1]) & (index[1] == index[2])
        peak = np.argmax(rho[diagonal])
        radius = float(np.sqrt((centroid[:, diagonal][:, peak] ** 2).sum()))
        exact = sedov_shock_radius(2 ** grid.dimensionality * problem.energy, problem.density, gamma, t)
        results.append(Verification('sedov_shock_radius', abs(radius - exact) / exact, SEDOV_TOLERANCE))
    return results


########################################################################################################################
# Runs

def _assemble(config: RunConfig,
              samples: Sequence[Tuple[int, float, float, AuditTotals]],
              parts: Sequence[Dict[str, Any]],
              initial: AuditTotals) -> RunReport:

    links = {kind: sum(p['links'][kind] for p in parts) for kind in CLASSES}
    rows = []
    for k, (cycle, t, dt, audit) in enumerate(samples):
        sent = {kind: (sum(p['deltas'][k][f'bytes_{kind}'] for p in parts) / links[kind] if links[kind] else 0.)
                for kind in CLASSES}
        rows.append(CycleRecord(cycle=cycle, t=t, dt=dt,
                                wall_ms=max(p['elapsed'][k] for p in parts) * 1000.,
                                exchange_calls=parts[0]['deltas'][k]['calls'],
                                bytes_face=float(sent['face']), bytes_edge=float(sent['edge']),
                                bytes_corner=float(sent['corner']),
                                total_mass=audit.total_mass, total_energy=audit.total_energy,
                                total_momentum_x=audit.momentum[0], total_momentum_y=audit.momentum[1],
                                total_momentum_z=audit.momentum[2]))
    return RunReport(config=config, rows=rows, initial=initial, init_time=max(p['init_time'] for p in parts))


def _rank_main(config: RunConfig, transport: Transport) -> Optional[RunReport]:
    """
    Worker of one rank: initialize, run the cycles, then gather timings, counters and cells on rank 0. Returns the
    report on rank 0 and None elsewhere.
    """

    layout = decompose_domain(config.grid, config.ranks)
    topology = build_topology(layout, transport.rank)
    exchanger = Exchanger(topology, transport, mode=config.exchange)
    advance = lagrangian_cycle if config.rezone == 'lagrange' else eulerian_cycle
    state = None
    try:
        start = perf_counter()
        state = initialize(config.problem_spec(), layout, transport.rank, config.hydro_options(), exchanger)
        init_time = perf_counter() - start
        initial = conservation_audit(state, transport)
        exchanger.counters.reset()

        samples, elapsed, deltas = [], [], []
        for _ in range(config.cycles):
            if state.t >= state.t_end * (1. - END_TOLERANCE):
                break
            before = exchanger.counters.snapshot()
            start = perf_counter()
            dt = advance(state, exchanger)
            elapsed.append(perf_counter() - start)
            after = exchanger.counters.snapshot()
            deltas.append({key: after[key] - before[key] for key in after})
            samples.append((state.cycle, state.t, dt, conservation_audit(state, transport)))

        local = {'elapsed': elapsed, 'deltas': deltas, 'init_time': init_time,
                 'links': {kind: topology.count(kind) for kind in CLASSES},
                 'cells': _gather_cells(state) if config.verify else None}
        parts = transport.gather(local, root=0)
    except Exception as error:
        if isinstance(error, NumericalError) and error.cycle is None:
            error.cycle = 0 if state is None else state.cycle + 1
        if transport.size > 1 and not isinstance(error, TransportError):
            transport.abort(f"{type(error).__name__}: {error}")
        raise

    if parts is None:
        return None
    report = _assemble(config, samples, parts, initial)
    if config.verify:
        report.verification = verify_run(report, _merge_cells([p['cells'] for p in parts]))
    return report


def run_simulation(config: RunConfig) -> Optional[RunReport]:
    """
    Run a configuration on its backend. The in-process backend runs one thread per rank; the multi-process backend
    runs the rank of the calling MPI process. The report is returned on rank 0, None is returned on the other ranks.

    :param config: Effective run configuration.
    """

    n = config.nranks
    oversubscribed = n > (cpu_count() or 1)
    if oversubscribed:
        logger.warning(f"{n} ranks oversubscribe the {cpu_count()} cores of the host, timings will be inflated.")
    logger.info(f"Running {config.problem} ({config.rezone}) on {'x'.join(map(str, config.cells))} cells over "
                f"{'x'.join(map(str, config.ranks))} ranks, {config.backend} backend")

    transports = make_transport(config.backend, n, delay_ms=config.delay_ms)
    if len(transports) == 1:
        report = _rank_main(config, transports[0])
    else:
        with ThreadPoolExecutor(max_workers=len(transports), thread_name_prefix='rank') as pool:
            futures = [pool.submit(_rank_main, config, transport) for transport in transports]
            wait(futures)
        if errors := [f.exception() for f in futures if f.exception() is not None]:
            raise next((e for e in errors if not isinstance(e, TransportError)), errors[0])
        report = futures[0].result()

    if report is not None:
        report.oversubscribed = oversubscribed
        logger.info(f"Completed {report.cycles} cycles to t = {report.final_time:.6e} in {report.wall_time:.3f} s "
                    f"(init {report.init_time:.3f} s, {report.calls_per_cycle:g} exchange calls per cycle)")
    return report


########################################################################################################################
# Reports

@contextmanager
def _record_database(database: Optional[RecordDatabase]) -> Iterator[RecordDatabase]:

    if database is not None:
        yield database
        return
    directory = mkdtemp(prefix='SALE_')
    database = RecordDatabase(directory, 'records').new()
    try:
        yield database
    finally:
        database.close(erase_file=True)
        rmtree(directory, ignore_errors=True)


def _log_saved(table_name: str, data: Dict[str, Any]) -> None:
    logger.debug(f"Stored a line in table {table_name}")


def store_report(report: RunReport, database: RecordDatabase) -> None:
    """
    Store the effective configuration, the cycle rows and the summary of a run.
    """

    database.create_table('Config', storing_table=False)
    database.add_data('Config', {('database_path' if key == 'database' else key): value
                                 for key, value in report.config.to_dict().items()})
    database.create_table('Cycles', fields=[(f.name, f.type) for f in fields(CycleRecord)])
    if report.rows:
        database.add_batch('Cycles', {name: [getattr(row, name) for row in report.rows] for name in CSV_COLUMNS})
    database.create_table('Summary', storing_table=False)
    database.register_post_save_signal('Summary', _log_saved)
    database.connect_signals()
    database.add_data('Summary', report.summary())


def emit_report(report: RunReport, path: str, database: Optional[RecordDatabase] = None) -> str:
    """
    Write the cycle rows of a run as CSV, header included.

    :param report: Report of the run.
    :param path: CSV file path.
    :param database: Record database keeping the run, a temporary one when None.
    """

    with _record_database(database) as records:
        store_report(report, records)
        try:
            records.export_csv('Cycles', path, fields=CSV_COLUMNS)
        except OSError as error:
            raise ConfigError('out', f"Cannot write the report '{path}': {error}") from error
    logger.info(f"Wrote {report.cycles} cycle rows to {abspath(path)}")
    return path


########################################################################################################################
# Scaling suites

def rank_split(n: int, active: Sequence[bool]) -> Tuple[int, int, int]:
    """
    Even split of n ranks over the active axes: n x 1 x 1 in 1D, a square in 2D, a cube in 3D.
    """

    dimensionality = sum(active)
    side = round(n ** (1. / dimensionality))
    if side ** dimensionality != n:
        raise ConfigError('ranks_list', f"{n} ranks cannot be split evenly over {dimensionality} axes.")
    return tuple(side if a else 1 for a in active)


def run_scaling_suite(base: RunConfig,
                      mode: str,
                      ranks_list: Sequence[int],
                      path: Optional[str] = None,
                      per_rank: Optional[Sequence[int]] = None,
                      database: Optional[RecordDatabase] = None) -> List[Dict[str, Any]]:
    """
    Run a strong or weak scaling series and report one row per rank count.

    :param base: Configuration of the series. Its cells are the global grid in strong mode and the per-rank block in
                 weak mode.
    :param mode: 'strong' (global cells fixed) or 'weak' (cells per rank fixed).
    :param ranks_list: Rank counts, starting at 1.
    :param path: CSV file path of the series.
    :param per_rank: Per-rank block of the weak series, the base cells by default.
    :param database: Record database receiving the Scaling table.
    """

    if mode not in SCALING_MODES:
        raise ConfigError('mode', f"Unknown scaling mode '{mode}', must be in {SCALING_MODES}.")
    if base.backend != 'inprocess':
        raise ConfigError('backend', "Scaling series run on the in-process backend.")
    ranks_list = [int(n) for n in ranks_list]
    if not ranks_list or ranks_list[0] != 1:
        raise ConfigError('ranks_list', f"The rank list must start at 1, got {ranks_list}.")
    active = base.grid.active_axes
    block = tuple(base.cells if per_rank is None else per_rank)

    rows, records = [], []
    for n in ranks_list:
        split = rank_split(n, active)
        cells = base.cells if mode == 'strong' else tuple(b * s for b, s in zip(block, split))
        report = run_simulation(base.with_updates(cells=cells, ranks=split, verify=False, out=None))
        records.append(ScalingRecord(mode=mode, ranks=n, wall_time=report.wall_time))
        rows.append({'mode': mode, 'ranks': n, 'cells_x': cells[0], 'cells_y': cells[1], 'cells_z': cells[2],
                     'cycles': report.cycles, 'wall_s': report.wall_time, 'efficiency': 0.,
                     'calls_per_cycle': report.calls_per_cycle,
                     'reference_calls_per_cycle': REFERENCE_CALLS[base.rezone],
                     'oversubscribed': report.oversubscribed})

    ratios = efficiency(records, mode)
    for row in rows:
        row['efficiency'] = ratios[row['ranks']]
        logger.info(f"{mode} scaling, {row['ranks']} ranks: {row['wall_s']:.3f} s, efficiency "
                    f"{row['efficiency']:.3f}")

    if path is not None or database is not None:
        with _record_database(database) as records_db:
            for row in rows:
                records_db.add_data('Scaling', row)
            if path is not None:
                try:
                    records_db.export_csv('Scaling', path, fields=SCALING_COLUMNS)
                except OSError as error:
                    raise ConfigError('out', f"Cannot write the scaling report '{path}': {error}") from error
                logger.info(f"Wrote the {mode} scaling series to {abspath(path)}")
    return rows
