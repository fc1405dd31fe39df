"""
Eulerian rezoning: first-order donor-cell remap of the Lagrangian-deformed mesh back onto the fixed initial mesh.

The swept volume of a face is the signed volume of the hexahedron spanned by its target and deformed positions,
positive when the face moved towards +axis (the low cell is then the donor). Every swept hexahedron splits its
faces consistently with the cells and with the neighboring swept hexahedra, so the target volume of a cell equals
its deformed volume minus its outgoing swept volumes to round-off.
"""

from typing import Dict, Optional
from dataclasses import dataclass, field
from logging import getLogger
import numpy as np

from SALE.kernel.field import Field, allocate_field
from SALE.kernel.exchange import Exchanger
from SALE.kernel.geometry import (corner_bits, corner_values, cell_corners, hex_volume, min_edge_length,
                                  scatter_to_vertices)
from SALE.kernel.errors import RemapOverrunError, PositivityError, DegenerateStateError
from SALE.app.state import SimulationState
from SALE.app.boundary import apply_boundary, apply_velocity_boundary
from SALE.app.lagrange import lagrangian_cycle

logger = getLogger('SALE.app')

POSITIVITY_TOLERANCE = 1e-13


@dataclass
class RemapFluxes:
    """
    Signed swept volume of every face normal to each active axis. Face i along an axis separates the storage cells
    i - 1 and i. Mass fluxes are filled by advect_cells.
    """

    volumes: Dict[int, np.ndarray] = field(default_factory=dict)
    mass: Dict[int, np.ndarray] = field(default_factory=dict)

    def donor_is_low(self, axis: int) -> np.ndarray:
        return self.volumes[axis] > 0.


def _swept_hexahedra(deformed: np.ndarray, target: np.ndarray, axis: int, active) -> list:

    vertex_shape = deformed.shape[1:]
    corners = []
    for c in range(8):
        bits = corner_bits(c)
        index = []
        for t in range(3):
            if t == axis:
                index.append(slice(0, vertex_shape[t]))
            elif active[t]:
                index.append(slice(bits[t], bits[t] + vertex_shape[t] - 1))
            else:
                index.append(slice(0, 1))
        source = target if bits[axis] == 0 else deformed
        p = source[(slice(None),) + tuple(index)]
        shift = [0. if (active[t] or t == axis) else float(bits[t]) for t in range(3)]
        if any(shift):
            p = p + np.array(shift).reshape(3, 1, 1, 1)
        corners.append(p)
    return corners


def compute_fluxes(deformed: Field, target: Field) -> RemapFluxes:
    """
    Swept volumes of every face between the deformed and the target vertex positions. Faces on the domain boundary
    carry no flux.

    :param deformed: Vertex positions after the Lagrangian step.
    :param target: Vertex positions of the target mesh.
    """

    layout, rank = deformed.layout, deformed.rank
    active = layout.active_axes
    _check_overrun(deformed, target)

    offset = layout.cell_offset(rank)
    cells = layout.grid.cells_per_axis
    fluxes = RemapFluxes()
    for axis in range(3):
        if not active[axis]:
            continue
        corners = _swept_hexahedra(deformed.data, target.data, axis, active)
        shape = corners[0].shape[1:]
        index = np.ix_(*(offset[t] + np.arange(shape[t]) for t in range(3)))
        plane_parity = (index[0] + index[1] + index[2]) % 2
        parities = []
        for face_axis in range(3):
            for side in (0, 1):
                if face_axis == axis:
                    parities.append(plane_parity if side == 0 else 1 - plane_parity)
                else:
                    parities.append(side)
        volume = hex_volume(corners, parities)

        inside = np.ones(shape, dtype=bool)
        for t in range(3):
            g = index[t]
            inside &= ((g >= 1) & (g <= cells[t] - 1)) if t == axis else ((g >= 0) & (g <= cells[t] - 1))
        fluxes.volumes[axis] = np.where(inside, volume, 0.)
    return fluxes


def _check_overrun(deformed: Field, target: Field) -> None:

    active = deformed.layout.active_axes
    edge = float(min_edge_length(cell_corners(target.interior, active), active).min())
    shift = np.sqrt(((deformed.interior - target.interior) ** 2).sum(axis=0))
    if (largest := float(shift.max())) >= 0.5 * edge:
        raise RemapOverrunError(f"Vertex displacement {largest:.3e} exceeds half the smallest edge {edge:.3e}.")


def _face_window(state: SimulationState, axis: int):
    """
    Faces of the interior cells along an axis, with the storage cells on their low and high sides.
    """

    g = state.layout.ghost_width
    n = state.volume.interior_shape[axis]
    faces, low, high = list(state.cells), list(state.cells), list(state.cells)
    faces[axis] = slice(g, g + n + 1)
    low[axis] = slice(g - 1, g + n)
    high[axis] = slice(g, g + n + 1)
    return tuple(faces), tuple(low), tuple(high)


def _cell_faces(flux: np.ndarray, axis: int):
    """
    Values of a face array on the low and high faces of every interior cell.
    """

    n = flux.shape[axis - 3]
    low = [slice(None)] * flux.ndim
    high = [slice(None)] * flux.ndim
    low[axis - 3] = slice(0, n - 1)
    high[axis - 3] = slice(1, n)
    return flux[tuple(low)], flux[tuple(high)]


def _divergence(flux: np.ndarray, axis: int) -> np.ndarray:
    """
    Inflow through the low face minus outflow through the high face of every interior cell.
    """

    low, high = _cell_faces(flux, axis)
    return low - high


def _global_cell(state: SimulationState, local) -> tuple:
    lo = [r[0] for r in state.layout.block_range(state.rank)]
    return tuple(int(l + i) for l, i in zip(lo, local))


def advect_cells(state: SimulationState, fluxes: RemapFluxes) -> None:
    """
    Donor-cell remap of the per-material masses, energies and volumes of the interior cells onto the target mesh.
    Cells with no swept face keep their state untouched.
    """

    cells = (Ellipsis,) + state.cells
    M = state.materials.count
    mass = state.mass.data[cells].copy()
    energy = mass * state.energy.data[cells]
    volume = state.fraction.data[cells] * state.volume.data[state.cells]
    moved_mass, moved_energy, moved_volume = np.zeros_like(mass), np.zeros_like(mass), np.zeros_like(mass)
    swept_cells = np.zeros(mass.shape[1:], dtype=bool)
    rho, e, f = state.density.data, state.energy.data, state.fraction.data

    for axis, swept in fluxes.volumes.items():
        faces, low, high = _face_window(state, axis)
        dV = swept[faces]
        donor_low = dV > 0.
        lo_face, hi_face = _cell_faces(dV, axis)
        swept_cells |= (lo_face != 0.) | (hi_face != 0.)
        f_donor = np.where(donor_low, f[(Ellipsis,) + low], f[(Ellipsis,) + high])
        rho_donor = np.where(donor_low, rho[(Ellipsis,) + low], rho[(Ellipsis,) + high])
        e_donor = np.where(donor_low, e[(Ellipsis,) + low], e[(Ellipsis,) + high])
        mass_flux = rho_donor * f_donor * dV
        fluxes.mass[axis] = mass_flux
        moved_mass += _divergence(mass_flux, axis)
        moved_energy += _divergence(mass_flux * e_donor, axis)
        moved_volume += _divergence(f_donor * dV, axis)

    mass = mass + moved_mass
    energy = energy + moved_energy
    volume = np.maximum(volume + moved_volume, 0.)

    scale = POSITIVITY_TOLERANCE * max(float(state.mass.data[cells].max()), 1e-300)
    if np.any(bad := mass < -scale):
        local = np.argwhere(bad)[0]
        raise PositivityError(_global_cell(state, local[1:]), f'mass of material {local[0]}',
                              float(mass[tuple(local)]))
    mass = np.maximum(mass, 0.)

    total = volume.sum(axis=0)
    fraction = np.divide(volume, total, out=np.zeros_like(volume), where=total > 0.)
    if M == 1:
        fraction = np.where(mass > 0., 1., fraction)
    target = state.target_volume[state.cells]
    density = np.divide(mass, fraction * target, out=np.zeros_like(mass), where=fraction > 0.)
    specific = np.divide(energy, mass, out=np.zeros_like(mass), where=mass > 0.)
    for slab, new in ((state.mass, mass), (state.fraction, fraction), (state.density, density),
                      (state.energy, specific)):
        slab.data[cells] = np.where(swept_cells, new, slab.data[cells])


def momentum_increments(state: SimulationState, fluxes: RemapFluxes, exchanger: Optional[Exchanger] = None) -> Field:
    """
    Momentum and kinetic energy carried into every cell by the mass fluxes, using the mean corner velocity of the
    donor cell. Ghost cells are filled by one exchange.
    """

    increments = allocate_field(state.layout, state.rank, 'cell', components=4, name='momentum_increment')
    u_cell = sum(corner_values(state.u.data, state.active)) / 8.
    k_cell = 0.5 * (u_cell ** 2).sum(axis=0)
    carried = np.concatenate((u_cell, k_cell[None]))
    cells = (Ellipsis,) + state.cells
    for axis, mass_flux in fluxes.mass.items():
        faces, low, high = _face_window(state, axis)
        total = mass_flux.sum(axis=0)
        donor = np.where(total > 0., carried[(Ellipsis,) + low], carried[(Ellipsis,) + high])
        increments.data[cells] += _divergence(total * donor, axis)
    if exchanger is not None:
        exchanger.blocking(increments)
    return increments


def advect_momentum(state: SimulationState, fluxes: RemapFluxes, exchanger: Optional[Exchanger] = None) -> None:
    """
    Remap the vertex velocities with the new lumped masses and deposit the kinetic energy lost by the remap into
    the internal energy of the surrounding cells. Requires the remapped masses of the ghost cells.
    """

    active = state.active
    increments = momentum_increments(state, fluxes, exchanger)
    physical = np.where(state.physical, increments.data, 0.) / 8.
    dP = scatter_to_vertices([physical[:3]] * 8, state.u.storage_shape, active)
    dK = scatter_to_vertices([physical[3]] * 8, state.vertex_mass.storage_shape, active)

    vertices = state.vertices
    m_old = state.vertex_mass.data[vertices].copy()
    m_new = state.update_vertex_mass()[vertices]
    if np.any(m_new <= 0.):
        raise DegenerateStateError(f"Rank {state.rank} has a vertex without mass after the remap.")

    u = state.u.data[(slice(None),) + vertices]
    kinetic_before = 0.5 * m_old * (u ** 2).sum(axis=0) + dK[vertices]
    state.u.data[(slice(None),) + vertices] = u + (dP[(slice(None),) + vertices] - (m_new - m_old) * u) / m_new
    apply_velocity_boundary(state)
    u = state.u.data[(slice(None),) + vertices]
    dissipated = kinetic_before - 0.5 * m_new * (u ** 2).sum(axis=0)

    cells = state.cells
    mass = state.cell_mass()[cells]
    share = sum(corner_values(dissipated / m_new, active)) * mass / 8.
    for m in range(state.materials.count):
        m_m = state.mass.data[m][cells]
        de = np.divide(share, mass, out=np.zeros_like(mass), where=m_m > 0.)
        state.energy.data[m][cells] = state.energy.data[m][cells] + de


def eulerian_cycle(state: SimulationState, exchanger: Exchanger) -> float:
    """
    Lagrangian step followed by a remap onto the initial mesh. Returns the time step taken.

    Exchange schedule on top of the Lagrangian one: densities and energies of the deformed cells, remapped masses,
    momentum increments, remapped densities, energies and fractions, and the remapped velocities.
    """

    dt = lagrangian_cycle(state, exchanger)
    exchanger.exchange([state.density, state.energy])
    fluxes = compute_fluxes(state.x, state.x0)
    advect_cells(state, fluxes)
    exchanger.exchange([state.mass])
    advect_momentum(state, fluxes, exchanger)
    exchanger.exchange([state.density, state.energy, state.fraction])
    state.x.data[...] = state.x0.data
    state.volume.data[...] = state.target_volume
    exchanger.exchange([state.u])
    apply_boundary(state, which='vertices')
    logger.debug(f"rank {state.rank} cycle {state.cycle}: remapped onto the initial mesh")
    return dt
