"""
Initial states of the verification problems: Sedov-Taylor blast wave, Sod shock tube and Noh implosion.

Every initializer works on one rank from global cell indices, then fills the ghosts with a single exchange round and
sets the first time step.
"""

from typing import Optional, Tuple
from dataclasses import dataclass, field
from logging import getLogger
import numpy as np

from SALE.kernel.grid import BlockLayout
from SALE.kernel.exchange import Exchanger
from SALE.kernel.errors import ConfigError
from SALE.app.materials import MaterialSet, eos_energy
from SALE.app.state import SimulationState, BoundarySpec, HydroOptions, allocate_state
from SALE.app.boundary import apply_boundary, reflect_vertices
from SALE.app.lagrange import refresh_eos, temperature, initial_dt

logger = getLogger('SALE.app')

PROBLEMS = ('sedov', 'sod', 'noh')
DEFAULT_END_TIMES = {'sedov': 0.25, 'sod': 0.2, 'noh': 0.6}
BACKGROUND_ENERGY = 1e-10
NOH_PRESSURE_FLOOR = 1e-6

State = Tuple[float, float]


@dataclass
class ProblemSpec:
    """
    Parameters of a verification problem.

    :param kind: 'sedov', 'sod' or 'noh'.
    :param gammas: Adiabatic index of every material.
    :param energy: Deposited energy E0 of the Sedov problem (simulated octant).
    :param density: Ambient density of the Sedov and Noh problems.
    :param left: (density, pressure) on the left of the Sod membrane.
    :param right: (density, pressure) on the right of the Sod membrane.
    :param split: Position of the Sod membrane as a fraction of the x extent.
    :param inflow_speed: Speed of the Noh inflow.
    :param strength: Give every material the nominal strength constants.
    :param t_end: End time.
    """

    kind: str
    gammas: Tuple[float, ...] = (1.4,)
    energy: float = 0.125
    density: float = 1.
    left: State = (1., 1.)
    right: State = (0.125, 0.1)
    split: float = 0.5
    inflow_speed: float = 1.
    t_end: Optional[float] = None
    strength: bool = False
    boundary: Optional[BoundarySpec] = field(default=None)

    def __post_init__(self):

        if self.kind not in PROBLEMS:
            raise ConfigError('problem', f"Unknown problem '{self.kind}', must be in {PROBLEMS}.")
        self.gammas = tuple(float(g) for g in self.gammas)
        if self.kind == 'sod' and len(self.gammas) > 2:
            raise ConfigError('materials', "The Sod problem holds one or two materials.")
        if self.kind != 'sod' and len(self.gammas) != 1:
            raise ConfigError('materials', f"The {self.kind} problem holds a single material.")
        if self.t_end is None:
            self.t_end = DEFAULT_END_TIMES[self.kind]
        if not self.t_end > 0.:
            raise ConfigError('t_end', f"The end time must be positive, got {self.t_end}.")
        if not 0. < self.split < 1.:
            raise ConfigError('split', f"The membrane position must lie in (0, 1), got {self.split}.")
        for key, value in (('energy', self.energy), ('density', self.density), ('inflow_speed', self.inflow_speed)):
            if not value > 0.:
                raise ConfigError(key, f"{key} must be positive, got {value}.")
        for side in (self.left, self.right):
            if not (side[0] > 0. and side[1] > 0.):
                raise ConfigError('sod', f"Sod states need positive density and pressure, got {side}.")
        if self.boundary is None:
            self.boundary = default_boundary(self.kind)

    @property
    def materials(self) -> MaterialSet:
        return MaterialSet.ideal_gases(self.gammas, strength=self.strength)


def default_boundary(kind: str) -> BoundarySpec:
    """
    Slip walls everywhere for the shock tube; slip symmetry planes on the low faces and free surfaces on the high
    faces for the blast wave and the implosion.
    """

    if kind == 'sod':
        return BoundarySpec.uniform('slip_wall')
    return BoundarySpec({(axis, side): 'slip_wall' if side == 0 else 'free_surface'
                         for axis in range(3) for side in (0, 1)})


def _set_material(state: SimulationState, m: int, mask: np.ndarray, rho: float, e: float) -> None:

    cells = state.cells
    V = state.volume.data[cells]
    state.fraction.data[m][cells] = np.where(mask, 1., state.fraction.data[m][cells])
    state.density.data[m][cells] = np.where(mask, rho, state.density.data[m][cells])
    state.energy.data[m][cells] = np.where(mask, e, state.energy.data[m][cells])
    state.mass.data[m][cells] = state.density.data[m][cells] * state.fraction.data[m][cells] * V


def _finalize(state: SimulationState, exchanger: Optional[Exchanger]) -> SimulationState:
    """
    Fill the ghosts, refresh the EoS and the lumped masses, and set the first time step. The initial velocities are
    kept on the wall vertices until the first cycle applies the velocity conditions.
    """

    if exchanger is not None:
        exchanger.exchange([state.mass, state.density, state.energy, state.fraction, state.x, state.u])
    refresh_eos(state)
    state.temperature_init.data[...] = temperature(state)
    apply_boundary(state, which='cells')
    reflect_vertices(state, state.x, state.u)
    state.update_vertex_mass()
    state.dt_prev = state.dt = initial_dt(state, exchanger)
    return state


def init_sedov(layout: BlockLayout,
               rank: int,
               E0: float = 0.125,
               rho0: float = 1.,
               gamma: float = 1.4,
               options: Optional[HydroOptions] = None,
               t_end: float = DEFAULT_END_TIMES['sedov'],
               exchanger: Optional[Exchanger] = None,
               materials: Optional[MaterialSet] = None) -> SimulationState:
    """
    Octant blast wave: uniform density, background energy floor and the energy E0 deposited in the cell touching the
    origin.

    :param layout: Domain decomposition (2D or 3D).
    :param rank: Rank to initialize.
    :param E0: Energy deposited in the origin cell.
    :param rho0: Ambient density.
    :param gamma: Adiabatic index.
    :param options: Numerical parameters.
    :param t_end: End time.
    :param exchanger: Exchanger filling the ghosts, None on a single rank without neighbors.
    :param materials: Material set replacing the ideal gas built from gamma.
    """

    if layout.grid.dimensionality < 2:
        raise ConfigError('problem', "The Sedov problem needs a 2D or 3D grid.")
    materials = MaterialSet.ideal_gases((gamma,)) if materials is None else materials
    state = allocate_state(layout, rank, materials, default_boundary('sedov'), options=options, t_end=t_end)
    floor = BACKGROUND_ENERGY * E0 / (rho0 * layout.grid.volume)
    _set_material(state, 0, np.ones(state.volume.interior_shape, dtype=bool), rho0, floor)

    if all(lo == 0 for lo, _ in layout.block_range(rank)):
        origin = tuple(s.start for s in state.cells)
        state.energy.data[(0,) + origin] += E0 / state.mass.data[(0,) + origin]
        logger.debug(f"rank {rank} deposits E0 = {E0} in the origin cell")
    return _finalize(state, exchanger)


def init_sod(layout: BlockLayout,
             rank: int,
             left: State = (1., 1.),
             right: State = (0.125, 0.1),
             gamma=1.4,
             split: float = 0.5,
             options: Optional[HydroOptions] = None,
             t_end: float = DEFAULT_END_TIMES['sod'],
             exchanger: Optional[Exchanger] = None,
             materials: Optional[MaterialSet] = None) -> SimulationState:
    """
    Shock tube along x: piecewise constant (density, pressure) split at a fraction of the x extent, at rest.
    A pair of adiabatic indices puts the left and right states in two distinct materials.

    :param layout: Domain decomposition.
    :param rank: Rank to initialize.
    :param left: (density, pressure) of the cells whose center lies left of the membrane.
    :param right: (density, pressure) of the other cells.
    :param gamma: Adiabatic index, or a pair of them for the two-material variant.
    :param split: Membrane position as a fraction of the x extent.
    :param options: Numerical parameters.
    :param t_end: End time.
    :param exchanger: Exchanger filling the ghosts.
    """

    gammas = tuple(np.atleast_1d(gamma).astype(float))
    materials = MaterialSet.ideal_gases(gammas) if materials is None else materials
    state = allocate_state(layout, rank, materials, default_boundary('sod'), options=options, t_end=t_end)
    centers = (state.global_cell_indices()[0] + 0.5) * layout.grid.spacing[0]
    on_left = np.broadcast_to((centers < split * layout.grid.domain_extent[0])[:, None, None],
                              state.volume.interior_shape)
    right_material = len(gammas) - 1
    _set_material(state, 0, on_left, left[0], eos_energy(left[0], left[1], gammas[0]))
    _set_material(state, right_material, ~on_left, right[0], eos_energy(right[0], right[1], gammas[-1]))
    return _finalize(state, exchanger)


def init_noh(layout: BlockLayout,
             rank: int,
             rho0: float = 1.,
             gamma: float = 5. / 3.,
             inflow_speed: float = 1.,
             options: Optional[HydroOptions] = None,
             t_end: float = DEFAULT_END_TIMES['noh'],
             exchanger: Optional[Exchanger] = None,
             materials: Optional[MaterialSet] = None) -> SimulationState:
    """
    Implosion: cold uniform gas flowing towards the origin with a uniform speed, planar in 1D and radial in the 2D
    quadrant or 3D octant.
    """

    materials = MaterialSet.ideal_gases((gamma,)) if materials is None else materials
    state = allocate_state(layout, rank, materials, default_boundary('noh'), options=options, t_end=t_end)
    pressure = NOH_PRESSURE_FLOOR * rho0 * inflow_speed ** 2
    _set_material(state, 0, np.ones(state.volume.interior_shape, dtype=bool), rho0,
                  eos_energy(rho0, pressure, gamma))

    x = state.x0.data
    radius = np.sqrt((x ** 2).sum(axis=0))
    direction = np.divide(x, radius, out=np.zeros_like(x), where=radius > 0.)
    state.u.data[...] = -inflow_speed * direction
    if layout.grid.dimensionality == 1:
        axis = state.active.index(True)
        state.u.data[...] = 0.
        state.u.data[axis] = -inflow_speed
    return _finalize(state, exchanger)


def initialize(problem: ProblemSpec,
               layout: BlockLayout,
               rank: int,
               options: Optional[HydroOptions] = None,
               exchanger: Optional[Exchanger] = None) -> SimulationState:
    """
    Initial state of a rank for the given problem.
    """

    common = dict(options=options, t_end=problem.t_end, exchanger=exchanger, materials=problem.materials)
    if problem.kind == 'sedov':
        return init_sedov(layout, rank, E0=problem.energy, rho0=problem.density, gamma=problem.gammas[0], **common)
    if problem.kind == 'sod':
        return init_sod(layout, rank, left=problem.left, right=problem.right, gamma=problem.gammas,
                        split=problem.split, **common)
    return init_noh(layout, rank, rho0=problem.density, gamma=problem.gammas[0], inflow_speed=problem.inflow_speed,
                    **common)
