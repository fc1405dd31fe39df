"""
Run configuration: flat ``key = value`` files and command line flags, flags taking precedence.
"""

from typing import Any, Dict, Mapping, Optional, Tuple
from dataclasses import dataclass, fields, asdict, replace
from configparser import ConfigParser, Error as ConfigParserError
from logging import getLogger
import re

from SALE.kernel.grid import GlobalGrid, decompose_domain
from SALE.kernel.transport import TRANSPORTS
from SALE.kernel.exchange import EXCHANGE_MODES
from SALE.kernel.errors import ConfigError
from SALE.app.problems import PROBLEMS, DEFAULT_END_TIMES, ProblemSpec
from SALE.app.state import HydroOptions

logger = getLogger('SALE.bench')

REZONES = ('lagrange', 'euler')
DEFAULT_CYCLES = {'lagrange': 20, 'euler': 200}
DEFAULT_CELLS = {'sedov': (32, 32, 32), 'sod': (400, 1, 1), 'noh': (400, 1, 1)}
MAX_CYCLES = 100000
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')
Triple = Tuple[int, int, int]


@dataclass(frozen=True)
class RunConfig:
    """
    Effective configuration of one run.

    :param problem: 'sedov', 'sod' or 'noh'.
    :param rezone: 'lagrange' or 'euler'.
    :param cells: Global cells per axis.
    :param ranks: Ranks per axis.
    :param cycles: Cycle limit.
    :param t_end: End time.
    :param cfl: Courant number.
    :param backend: 'inprocess' or 'multiprocess'.
    :param exchange: 'nonblocking' or 'blocking'.
    :param materials: Number of materials (2 runs the two-material shock tube).
    :param gamma: Adiabatic index of every material.
    :param energy: Sedov deposited energy.
    :param density: Sedov and Noh ambient density.
    :param split: Sod membrane position.
    :param inflow_speed: Noh inflow speed.
    :param strength: Evaluate the Steinberg strength diagnostics.
    :param verify: Compare the final state with the oracles.
    :param out: CSV report path.
    :param database: Record database path.
    :param delay_ms: Message delay of the in-process transport.
    :param log_level: Logging level.
    """

    problem: str = 'sod'
    rezone: str = 'lagrange'
    cells: Optional[Triple] = None
    ranks: Triple = (1, 1, 1)
    cycles: Optional[int] = None
    t_end: Optional[float] = None
    cfl: float = 0.25
    backend: str = 'inprocess'
    exchange: str = 'nonblocking'
    materials: int = 1
    gamma: Optional[float] = None
    energy: float = 0.125
    density: float = 1.
    split: float = 0.5
    inflow_speed: float = 1.
    strength: bool = False
    verify: bool = False
    out: Optional[str] = None
    database: Optional[str] = None
    delay_ms: float = 0.
    log_level: str = 'INFO'

    def __post_init__(self):

        for key, value, choices in (('problem', self.problem, PROBLEMS), ('rezone', self.rezone, REZONES),
                                    ('backend', self.backend, TRANSPORTS), ('exchange', self.exchange, EXCHANGE_MODES),
                                    ('log_level', self.log_level, LOG_LEVELS)):
            if value not in choices:
                raise ConfigError(key, f"'{value}' is not in {choices}.")
        if self.cells is None:
            object.__setattr__(self, 'cells', DEFAULT_CELLS[self.problem])
        if self.gamma is None:
            object.__setattr__(self, 'gamma', 5. / 3. if self.problem == 'noh' else 1.4)
        if self.cycles is None:
            object.__setattr__(self, 'cycles', MAX_CYCLES if self.t_end is not None else DEFAULT_CYCLES[self.rezone])
        if self.t_end is None:
            object.__setattr__(self, 't_end', DEFAULT_END_TIMES[self.problem])
        if self.cycles < 1:
            raise ConfigError('cycles', f"At least one cycle is required, got {self.cycles}.")
        if self.materials not in (1, 2) or (self.materials == 2 and self.problem != 'sod'):
            raise ConfigError('materials', "Two materials are only available for the sod problem.")
        if self.delay_ms < 0.:
            raise ConfigError('delay_ms', f"The message delay must be non-negative, got {self.delay_ms}.")
        HydroOptions(cfl=self.cfl)
        self.problem_spec()
        decompose_domain(self.grid, self.ranks)

    @property
    def grid(self) -> GlobalGrid:
        return GlobalGrid(cells_per_axis=self.cells)

    @property
    def nranks(self) -> int:
        return self.ranks[0] * self.ranks[1] * self.ranks[2]

    def problem_spec(self) -> ProblemSpec:
        return ProblemSpec(kind=self.problem, gammas=(self.gamma,) * self.materials, energy=self.energy,
                           density=self.density, split=self.split, inflow_speed=self.inflow_speed, t_end=self.t_end,
                           strength=self.strength)

    def hydro_options(self) -> HydroOptions:
        return HydroOptions(cfl=self.cfl, exchange=self.exchange, strength=self.strength)

    def to_dict(self) -> Dict[str, Any]:
        """
        Flat record of the configuration, triples written as 'NXxNYxNZ'.
        """

        record = asdict(self)
        for key in ('cells', 'ranks'):
            record[key] = 'x'.join(str(n) for n in record[key])
        return {key: ('' if value is None else value) for key, value in record.items()}

    def with_updates(self, **changes) -> 'RunConfig':
        return replace(self, **changes)


def parse_triple(key: str, text: str) -> Triple:
    """
    Read '400x1x1', '400,1,1' or '400 1 1'; missing trailing axes get a single cell.
    """

    parts = [p for p in re.split(r'[x,\s]+', str(text).strip()) if p]
    try:
        values = [int(p) for p in parts]
    except ValueError as error:
        raise ConfigError(key, f"Expected up to three integers, got '{text}'.") from error
    if not 1 <= len(values) <= 3 or any(v < 1 for v in values):
        raise ConfigError(key, f"Expected up to three positive integers, got '{text}'.")
    return tuple(values + [1] * (3 - len(values)))


def _convert(key: str, value: Any, kind: type) -> Any:

    if value is None or (isinstance(value, str) and value.strip().lower() in ('', 'none')):
        return None
    if key in ('cells', 'ranks'):
        return value if isinstance(value, tuple) else parse_triple(key, value)
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            return ConfigParser.BOOLEAN_STATES[str(value).strip().lower()]
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
    except (KeyError, ValueError) as error:
        raise ConfigError(key, f"Cannot read '{value}' as {kind.__name__}.") from error
    return str(value).strip()


_TYPES = {'cells': tuple, 'ranks': tuple, 'cycles': int, 't_end': float, 'cfl': float, 'materials': int,
          'gamma': float, 'energy': float, 'density': float, 'split': float, 'inflow_speed': float,
          'strength': bool, 'verify': bool, 'delay_ms': float}


def parse_config(path: Optional[str] = None, flags: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Read a flat ``key = value`` file and apply the flags on top. Flags set to None are ignored.

    :param path: Configuration file.
    :param flags: Overrides, typically from the command line.
    """

    known = {f.name for f in fields(RunConfig)}
    values: Dict[str, Any] = {}
    if path is not None:
        parser = ConfigParser(inline_comment_prefixes=('#', ';'))
        parser.optionxform = str
        try:
            with open(path) as file:
                parser.read_string('[run]\n' + file.read())
        except OSError as error:
            raise ConfigError('config', f"Cannot read the configuration file '{path}': {error}") from error
        except ConfigParserError as error:
            raise ConfigError('config', f"Malformed configuration file '{path}': {error}") from error
        values.update(parser['run'])
    for key, value in (flags or {}).items():
        if value is not None:
            values[key.replace('-', '_')] = value

    parsed = {}
    for key, value in values.items():
        key = key.strip().replace('-', '_')
        if key not in known:
            raise ConfigError(key, f"Unknown configuration key, must be in {sorted(known)}.")
        if (converted := _convert(key, value, _TYPES.get(key, str))) is not None:
            parsed[key] = converted
    if 'log_level' in parsed:
        parsed['log_level'] = parsed['log_level'].upper()
    config = RunConfig(**parsed)
    logger.debug(f"Effective configuration: {config.to_dict()}")
    return config
