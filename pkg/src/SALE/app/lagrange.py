"""
Explicit Lagrangian cycle on the staggered grid.

Forces are corner forces: the pressure of a cell pushes each of its corners along the derivative of the cell volume
with respect to that corner. The compression work of a cell is the same corner gradients contracted with the
time-centered corner velocities, so that kinetic plus internal energy is conserved to round-off.
"""

from typing import Optional
from logging import getLogger
import numpy as np

from SALE.kernel.exchange import Exchanger
from SALE.kernel.geometry import (cell_corners, corner_values, hex_gradients, min_edge_length, scatter_to_vertices,
                                  check_volumes)
from SALE.kernel.errors import TimestepCollapseError, EmptyCellError
from SALE.app.state import SimulationState
from SALE.app.materials import CellThermo, evaluate_cell, steinberg_shear, steinberg_yield
from SALE.app.boundary import apply_boundary, apply_velocity_boundary

logger = getLogger('SALE.app')

TINY = 1e-30


def refresh_eos(state: SimulationState) -> None:
    """
    Pressure and sound speed of the interior cells from the per-material densities and energies.
    """

    cells = (Ellipsis,) + state.cells
    f, rho, e = state.fraction.data[cells], state.density.data[cells], state.energy.data[cells]
    if np.any(np.all(f == 0., axis=0)):
        raise EmptyCellError(f"Rank {state.rank} holds a cell without material.")
    thermo = evaluate_cell(CellThermo(f, rho, e), state.materials)
    state.pressure.data[cells] = thermo.pressure
    state.sound_speed.data[cells] = thermo.sound_speed


def temperature(state: SimulationState) -> np.ndarray:
    """
    Volume-fraction weighted temperature T = e / cv of the storage cells.
    """

    T = np.zeros(state.volume.storage_shape)
    for m, material in enumerate(state.materials.materials):
        T += state.fraction.data[m] * state.energy.data[m] / material.cv
    return T


def apply_strength(state: SimulationState, exchanger: Optional[Exchanger] = None) -> None:
    """
    Steinberg shear modulus and yield stress of every material with strength constants, then blocking exchange of
    both fields.
    """

    cells = state.cells
    T, T_init = temperature(state)[cells], state.temperature_init.data[cells]
    p, eps = state.pressure.data[cells], state.plastic_strain.data[cells]
    for m, material in enumerate(state.materials.materials):
        if not material.has_strength:
            continue
        rho = state.density.data[m][cells]
        present = rho > 0.
        safe = np.where(present, rho, 1.)
        shear = steinberg_shear(material, p, safe, material.rho0, T, T_init)
        state.shear.data[m][cells] = np.where(present, shear, 0.)
        state.yield_stress.data[m][cells] = np.where(present,
                                                     steinberg_yield(material, eps, shear, material.shear0), 0.)
    if exchanger is not None:
        for field in (state.shear, state.yield_stress):
            for m in range(state.materials.count):
                exchanger.blocking(field.select(m))


def compute_viscosity(state: SimulationState) -> None:
    """
    Artificial viscosity q = rho (c_q du^2 + c_l c |du|) in compressing cells, du being the most negative velocity jump
    across the cell along its logical directions.
    """

    opts, active = state.options, state.active
    x, u = cell_corners(state.x.interior, active), corner_values(state.u.interior, active)
    jump = None
    for axis in range(3):
        if not active[axis]:
            continue
        hi = [c for c in range(8) if (c >> axis) & 1]
        lo = [c ^ (1 << axis) for c in hi]
        d = (sum(x[c] for c in hi) - sum(x[c] for c in lo)) / 4.
        du = (sum(u[c] for c in hi) - sum(u[c] for c in lo)) / 4.
        along = (du * d).sum(axis=0) / np.sqrt((d * d).sum(axis=0))
        jump = along if jump is None else np.minimum(jump, along)
    cells = state.cells
    if jump is None:
        state.viscosity.data[cells] = 0.
        return
    rho = state.cell_mass()[cells] / state.volume.data[cells]
    c = state.sound_speed.data[cells]
    q = rho * (opts.c_q * jump ** 2 + opts.c_l * c * np.abs(jump))
    state.viscosity.data[cells] = np.where(jump < 0., q, 0.)


def initial_dt(state: SimulationState, exchanger: Optional[Exchanger] = None) -> float:
    """
    First time step: a small fraction of the time a signal needs to cross the smallest domain extent.
    """

    grid = state.layout.grid
    extent = min(L for L, a in zip(grid.domain_extent, state.active) if a) if any(state.active) else 1.
    speed = state.sound_speed.data[state.cells] + np.sqrt((state.u.interior ** 2).sum(axis=0)).max()
    local = extent / (float(speed.max()) + TINY)
    crossing = local if exchanger is None else exchanger.transport.allreduce_min(local)
    return state.options.initial_dt_factor * crossing


def local_dt(state: SimulationState, cfl: float) -> float:

    active = state.active
    x, u = cell_corners(state.x.interior, active), corner_values(state.u.interior, active)
    edge = min_edge_length(x, active)
    speed = np.maximum.reduce([np.sqrt((v ** 2).sum(axis=0)) for v in u])
    return float((cfl * edge / (state.sound_speed.data[state.cells] + speed + TINY)).min())


def compute_dt(state: SimulationState, cfl: Optional[float] = None, exchanger: Optional[Exchanger] = None) -> float:
    """
    Global CFL time step capped by the growth limit and the end time.

    :param state: State of the rank.
    :param cfl: Courant number, the state's option by default.
    :param exchanger: Exchanger used for the global minimum (one counted call); local minimum when None.
    """

    opts = state.options
    if opts.fixed_dt is not None:
        dt = opts.fixed_dt
    else:
        dt = local_dt(state, opts.cfl if cfl is None else cfl)
        dt = dt if exchanger is None else exchanger.allreduce_min(dt)
        if state.dt_prev > 0.:
            dt = min(dt, opts.dt_growth * state.dt_prev)
        dt = min(dt, state.t_end - state.t)
    if dt < opts.collapse_factor * state.t_end:
        raise TimestepCollapseError(f"Time step {dt:.3e} fell below {opts.collapse_factor:.0e} t_end at t = "
                                    f"{state.t:.6e}.")
    return dt


def force_pressure(state: SimulationState) -> np.ndarray:
    """
    Pressure driving the corners: floored pressure plus viscosity, zero outside the physical domain.
    """

    P = np.maximum(state.pressure.data, 0.) + state.viscosity.data
    return np.where(state.physical, P, 0.)


def compute_forces(state: SimulationState) -> np.ndarray:
    """
    Corner-force sum at every vertex. Also refreshes the lumped vertex masses and keeps the corner volume gradients
    for the compression work.
    """

    active = state.active
    state.corner_gradients = hex_gradients(cell_corners(state.x.data, active), [state.parity] * 6)
    P = force_pressure(state)
    state.update_vertex_mass()
    return scatter_to_vertices([P * G for G in state.corner_gradients], state.u.storage_shape, active)


def advance_kinematics(state: SimulationState, forces: np.ndarray, dt: float) -> None:
    """
    u += F / m dt on the interior vertices, velocity boundary conditions, then x += u dt. The compression work of the
    interior cells is kept for update_thermo.
    """

    vertices = (slice(None),) + state.vertices
    m = state.vertex_mass.data[state.vertices]
    u_old = state.u.data[vertices].copy()
    accel = np.divide(forces[vertices], m, out=np.zeros_like(u_old), where=m > 0.)
    state.u.data[vertices] = u_old + accel * dt
    apply_velocity_boundary(state)
    u_mid = 0.5 * (u_old + state.u.data[vertices])

    if state.corner_gradients is not None:
        cells = (slice(None),) + state.cells
        work = 0.
        for G, v in zip(state.corner_gradients, corner_values(u_mid, state.active)):
            work = work + (G[cells] * v).sum(axis=0)
        state.work = work * dt
    state.x.data[vertices] = state.x.data[vertices] + state.u.data[vertices] * dt


def update_thermo(state: SimulationState, dt: float) -> None:
    """
    New volumes from the moved vertices, compression work into the specific energies, densities from the constant
    masses and EoS refresh.
    """

    cells = state.cells
    volume = state.compute_volume()
    if state.work is None:
        work = volume[cells] - state.volume.data[cells]
    else:
        work = state.work
    state.volume.data[...] = volume
    check_volumes(state.volume)

    P = np.maximum(state.pressure.data[cells], 0.) + state.viscosity.data[cells]
    V = state.volume.data[cells]
    for m in range(state.materials.count):
        mass, f = state.mass.data[m][cells], state.fraction.data[m][cells]
        de = np.divide(-P * f * work, mass, out=np.zeros_like(mass), where=mass > 0.)
        state.energy.data[m][cells] = state.energy.data[m][cells] + de
        state.density.data[m][cells] = np.divide(mass, f * V, out=np.zeros_like(mass), where=f > 0.)
    state.work = None
    refresh_eos(state)


def lagrangian_cycle(state: SimulationState, exchanger: Exchanger) -> float:
    """
    Advance the state by one Lagrangian step and return the time step taken.

    Exchange schedule: densities, energies and fractions of every material; pressure and viscosity; one global time
    step reduction; positions and velocities. Strength adds the shear modulus and yield stress of every material.
    """

    exchanger.exchange([state.density, state.energy, state.fraction])
    refresh_eos(state)
    if state.options.strength and state.materials.has_strength:
        apply_strength(state, exchanger)
    compute_viscosity(state)
    exchanger.exchange([state.pressure, state.viscosity])
    apply_boundary(state, which='cells')

    dt = compute_dt(state, exchanger=exchanger)
    forces = compute_forces(state)
    advance_kinematics(state, forces, dt)
    update_thermo(state, dt)
    exchanger.exchange([state.x, state.u])
    apply_boundary(state, which='vertices')

    state.t += dt
    state.dt_prev = state.dt = dt
    state.cycle += 1
    logger.debug(f"rank {state.rank} cycle {state.cycle}: t = {state.t:.6e}, dt = {dt:.6e}")
    return dt
