from typing import Dict, Optional, Tuple
from dataclasses import dataclass, field
import numpy as np

from SALE.kernel.grid import BlockLayout
from SALE.kernel.field import Field, allocate_field
from SALE.kernel.geometry import cell_parity, cell_volumes, corner_values, scatter_to_vertices
from SALE.kernel.transport import ExchangeCounters
from SALE.kernel.errors import ConfigError
from SALE.app.materials import MaterialSet

BOUNDARY_CONDITIONS = ('slip_wall', 'free_surface')
Face = Tuple[int, int]


@dataclass(frozen=True)
class BoundarySpec:
    """
    Boundary condition of every domain face, keyed by (axis, side) with side 0 for low and 1 for high.
    """

    faces: Dict[Face, str]

    def __post_init__(self):
        for face, condition in self.faces.items():
            if condition not in BOUNDARY_CONDITIONS:
                raise ConfigError('boundary', f"Unknown condition '{condition}' on face {face}, must be in "
                                              f"{BOUNDARY_CONDITIONS}.")

    @classmethod
    def uniform(cls, condition: str) -> 'BoundarySpec':
        return cls({(axis, side): condition for axis in range(3) for side in (0, 1)})

    def __getitem__(self, face: Face) -> str:
        return self.faces[face]

    def check(self, layout: BlockLayout) -> None:
        missing = [(axis, side) for axis in range(3) if layout.active_axes[axis] for side in (0, 1)
                   if (axis, side) not in self.faces]
        if missing:
            raise ConfigError('boundary', f"No boundary condition given for the faces {missing}.")


@dataclass
class HydroOptions:
    """
    Numerical parameters of the cycle.

    :param cfl: Courant number.
    :param c_q: Quadratic viscosity coefficient.
    :param c_l: Linear viscosity coefficient.
    :param dt_growth: Maximal ratio between two successive time steps.
    :param initial_dt_factor: First time step as a fraction of the domain crossing time.
    :param collapse_factor: Smallest admissible time step as a fraction of t_end.
    :param exchange: 'nonblocking' or 'blocking' exchange of grouped fields.
    :param strength: Evaluate the Steinberg shear modulus and yield stress every cycle.
    :param fixed_dt: Use this time step instead of the CFL condition.
    """

    cfl: float = 0.25
    c_q: float = 2.
    c_l: float = 0.25
    dt_growth: float = 1.1
    initial_dt_factor: float = 1e-6
    collapse_factor: float = 1e-14
    exchange: str = 'nonblocking'
    strength: bool = False
    fixed_dt: Optional[float] = None

    def __post_init__(self):
        if not 0. < self.cfl < 1.:
            raise ConfigError('cfl', f"The Courant number must lie in (0, 1), got {self.cfl}.")


class SimulationState:

    def __init__(self,
                 layout: BlockLayout,
                 rank: int,
                 materials: MaterialSet,
                 boundary: BoundarySpec,
                 options: Optional[HydroOptions] = None,
                 t_end: float = 1.):
        """
        Every field of a rank block plus time and exchange bookkeeping. Kinematics live on vertices, thermodynamics
        on cells with one slab per material.

        :param layout: Domain decomposition.
        :param rank: Rank owning the block.
        :param materials: Material definitions.
        :param boundary: Domain boundary conditions.
        :param options: Numerical parameters.
        :param t_end: End time of the simulation.
        """

        boundary.check(layout)
        self.layout = layout
        self.rank = rank
        self.materials = materials
        self.boundary = boundary
        self.options = HydroOptions() if options is None else options
        self.t_end = t_end
        self.active = layout.active_axes

        M = materials.count
        self.x = allocate_field(layout, rank, 'vertex', components=3, name='position')
        self.x0 = allocate_field(layout, rank, 'vertex', components=3, name='target_position')
        self.u = allocate_field(layout, rank, 'vertex', components=3, name='velocity')
        self.vertex_mass = allocate_field(layout, rank, 'vertex', name='vertex_mass')
        self.volume = allocate_field(layout, rank, 'cell', name='volume')
        self.mass = allocate_field(layout, rank, 'cell', material_count=M, name='mass')
        self.density = allocate_field(layout, rank, 'cell', material_count=M, name='density')
        self.energy = allocate_field(layout, rank, 'cell', material_count=M, name='energy')
        self.fraction = allocate_field(layout, rank, 'cell', material_count=M, name='fraction')
        self.pressure = allocate_field(layout, rank, 'cell', name='pressure')
        self.viscosity = allocate_field(layout, rank, 'cell', name='viscosity')
        self.sound_speed = allocate_field(layout, rank, 'cell', name='sound_speed')
        self.temperature_init = allocate_field(layout, rank, 'cell', name='temperature_init')
        self.plastic_strain = allocate_field(layout, rank, 'cell', name='plastic_strain')
        self.shear = allocate_field(layout, rank, 'cell', material_count=M, name='shear')
        self.yield_stress = allocate_field(layout, rank, 'cell', material_count=M, name='yield')

        self.t = 0.
        self.dt = 0.
        self.dt_prev = 0.
        self.cycle = 0
        self.counters = ExchangeCounters()

        self.parity = cell_parity(layout, rank)
        self.physical = self.__physical_cells()
        self.corner_gradients = None
        self.work = None
        self.target_volume = None

    def __physical_cells(self) -> np.ndarray:

        offset = self.layout.cell_offset(self.rank)
        masks = []
        for axis, n in enumerate(self.volume.storage_shape):
            index = offset[axis] + np.arange(n)
            masks.append((index >= 0) & (index < self.layout.grid.cells_per_axis[axis]))
        return masks[0][:, None, None] & masks[1][None, :, None] & masks[2][None, None, :]

    @property
    def cells(self) -> Tuple[slice, slice, slice]:
        return self.volume.interior_slices

    @property
    def vertices(self) -> Tuple[slice, slice, slice]:
        return self.x.interior_slices

    @property
    def owned_vertices(self) -> Tuple[slice, slice, slice]:
        """
        Interior vertices owned by this rank: replicated planes belong to the lower block.
        """

        slices = []
        for axis, s in enumerate(self.vertices):
            shared = self.active[axis] and not self.layout.touches_boundary(self.rank, axis, 1)
            slices.append(slice(s.start, s.stop - 1) if shared else s)
        return tuple(slices)

    def global_cell_indices(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Global index of the interior cells along each axis.
        """

        return tuple(lo + np.arange(hi - lo + 1) for lo, hi in self.layout.block_range(self.rank))

    def cell_mass(self) -> np.ndarray:
        return self.mass.data.sum(axis=0)

    def compute_volume(self) -> np.ndarray:
        return cell_volumes(self.x.data, self.parity, self.active)

    def update_vertex_mass(self) -> np.ndarray:
        """
        Lump 1/8 of the mass of every physical cell on each of its corners.
        """

        m = np.where(self.physical, self.cell_mass(), 0.) / 8.
        self.vertex_mass.data[...] = scatter_to_vertices([m] * 8, self.vertex_mass.storage_shape, self.active)
        return self.vertex_mass.data

    def centroids(self) -> np.ndarray:
        """
        Centroid (mean of the corners) of the interior cells.
        """

        corners = corner_values(self.x.interior, self.active)
        centroid = sum(corners) / 8.
        for axis, active in enumerate(self.active):
            if not active:
                centroid[axis] += 0.5
        return centroid

    def cell_density(self) -> np.ndarray:
        return self.cell_mass() / self.volume.data


def allocate_state(layout: BlockLayout,
                   rank: int,
                   materials: MaterialSet,
                   boundary: BoundarySpec,
                   options: Optional[HydroOptions] = None,
                   t_end: float = 1.) -> SimulationState:
    """
    Allocate a state on the undeformed mesh of the block: uniform vertex spacing, zero velocity and thermodynamics.
    """

    state = SimulationState(layout, rank, materials, boundary, options=options, t_end=t_end)
    offset = layout.cell_offset(rank)
    spacing = layout.grid.spacing
    for axis in range(3):
        n = state.x.storage_shape[axis]
        coords = (offset[axis] + np.arange(n)) * spacing[axis] if state.active[axis] else np.zeros(n)
        shape = [1, 1, 1]
        shape[axis] = n
        state.x0.data[axis] = coords.reshape(shape)
    state.x.data[...] = state.x0.data
    state.volume.data[...] = state.compute_volume()
    state.target_volume = state.volume.data.copy()
    return state
