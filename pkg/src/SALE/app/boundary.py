"""
Slip wall and free surface conditions on the physical faces of a block.

Ghost cells mirror the adjacent interior cells; free surfaces then zero the ghost pressure and viscosity. Ghost vertices
are reflected across the boundary plane, the normal velocity being reversed on slip walls. Boundary vertices of slip
walls have no normal velocity.
"""

from typing import Iterable, Tuple

from SALE.app.state import SimulationState, BoundarySpec


def _index(axis: int, i: int) -> Tuple:
    index = [slice(None)] * 3
    index[axis] = i
    return (Ellipsis,) + tuple(index)


def _boundary_faces(state: SimulationState) -> Iterable[Tuple[int, int]]:
    for axis in range(3):
        for side in (0, 1):
            if state.layout.touches_boundary(state.rank, axis, side):
                yield axis, side


def apply_cell_boundary(state: SimulationState, conditions: BoundarySpec) -> None:

    g = state.layout.ghost_width
    fields = [state.mass, state.density, state.energy, state.fraction, state.pressure, state.viscosity,
              state.sound_speed, state.temperature_init, state.plastic_strain, state.shear, state.yield_stress]
    for axis, side in _boundary_faces(state):
        n = state.volume.interior_shape[axis]
        for k in range(g):
            ghost, mirror = (g - 1 - k, g + k) if side == 0 else (g + n + k, g + n - 1 - k)
            for field in fields:
                field.data[_index(axis, ghost)] = field.data[_index(axis, mirror)]
            if conditions[(axis, side)] == 'free_surface':
                state.pressure.data[_index(axis, ghost)] = 0.
                state.viscosity.data[_index(axis, ghost)] = 0.


def reflect_vertices(state: SimulationState, positions, velocities=None, conditions: BoundarySpec = None) -> None:
    """
    Fill the ghost vertices of the physical faces by reflection across the boundary planes.

    :param state: State of the rank.
    :param positions: Vertex position field to reflect.
    :param velocities: Optional vertex velocity field mirrored along.
    :param conditions: Boundary conditions, the state's ones by default.
    """

    conditions = state.boundary if conditions is None else conditions
    g = state.layout.ghost_width
    for axis, side in _boundary_faces(state):
        n = state.volume.interior_shape[axis]
        plane = g if side == 0 else g + n
        for k in range(g):
            ghost, mirror = (plane - 1 - k, plane + 1 + k) if side == 0 else (plane + 1 + k, plane - 1 - k)
            x = positions.data
            x[_index(axis, ghost)] = x[_index(axis, mirror)]
            x[axis][_index(axis, ghost)[1:]] = 2. * x[axis][_index(axis, plane)[1:]] - x[axis][_index(axis, mirror)[1:]]
            if velocities is not None:
                u = velocities.data
                u[_index(axis, ghost)] = u[_index(axis, mirror)]
                if conditions[(axis, side)] == 'slip_wall':
                    u[axis][_index(axis, ghost)[1:]] = -u[axis][_index(axis, mirror)[1:]]


def apply_velocity_boundary(state: SimulationState, conditions: BoundarySpec = None) -> None:
    """
    Zero the normal velocity of slip wall vertices and every velocity component along inert axes.
    """

    conditions = state.boundary if conditions is None else conditions
    g = state.layout.ghost_width
    u = state.u.data
    for axis in range(3):
        if not state.active[axis]:
            u[axis] = 0.
    for axis, side in _boundary_faces(state):
        if conditions[(axis, side)] == 'slip_wall':
            plane = g if side == 0 else g + state.volume.interior_shape[axis]
            u[axis][_index(axis, plane)[1:]] = 0.


def apply_boundary(state: SimulationState, conditions: BoundarySpec = None, which: str = 'all') -> None:
    """
    Apply the boundary conditions to the ghost cells and / or the boundary and ghost vertices.

    :param state: State of the rank.
    :param conditions: Boundary conditions, the state's ones by default.
    :param which: 'cells', 'vertices' or 'all'.
    """

    conditions = state.boundary if conditions is None else conditions
    if which in ('cells', 'all'):
        apply_cell_boundary(state, conditions)
    if which in ('vertices', 'all'):
        apply_velocity_boundary(state, conditions)
        reflect_vertices(state, state.x, state.u, conditions)
