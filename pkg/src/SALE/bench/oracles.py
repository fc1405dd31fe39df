"""
Reference solutions and audits: exact Riemann solver, Sedov self-similar blast wave, planar Noh implosion, conservation
audit and parallel efficiency.
"""

from typing import Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass
from functools import lru_cache
from math import fsum, pi
import numpy as np
from scipy.integrate import solve_ivp

from SALE.kernel.transport import Transport
from SALE.kernel.errors import VacuumError, ConvergenceError, MissingBaselineError, ConfigError
from SALE.app.state import SimulationState

GasState = Tuple[float, float, float]
SCALING_MODES = ('strong', 'weak')


########################################################################################################################
# Exact Riemann solver

@dataclass(frozen=True)
class RiemannSolution:
    """
    Star region and wave structure of an ideal gas Riemann problem.

    :param left: Left (density, velocity, pressure).
    :param right: Right (density, velocity, pressure).
    :param gamma: Adiabatic index.
    :param p_star: Pressure of the star region.
    :param u_star: Velocity of the star region.
    :param residual: Pressure function at p_star.
    """

    left: GasState
    right: GasState
    gamma: float
    p_star: float
    u_star: float
    residual: float

    @property
    def left_wave(self) -> str:
        return 'shock' if self.p_star > self.left[2] else 'rarefaction'

    @property
    def right_wave(self) -> str:
        return 'shock' if self.p_star > self.right[2] else 'rarefaction'

    def sample(self, xi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Density, velocity and pressure at the similarity coordinates xi = x / t.
        """

        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        rho, u, p = np.empty_like(xi), np.empty_like(xi), np.empty_like(xi)
        left_side = xi <= self.u_star
        for side, mask, sign in ((self.left, left_side, -1.), (self.right, ~left_side, 1.)):
            r, v, q = _sample_side(side, self.p_star, self.u_star, self.gamma, sign, xi[mask])
            rho[mask], u[mask], p[mask] = r, v, q
        return rho, u, p


def _sound_speed(state: GasState, gamma: float) -> float:
    return float(np.sqrt(gamma * state[2] / state[0]))


def _pressure_function(p: float, state: GasState, gamma: float) -> Tuple[float, float]:
    """
    Velocity jump across one wave as a function of the star pressure, and its derivative.
    """

    rho, _, pk = state
    c = _sound_speed(state, gamma)
    if p > pk:
        A, B = 2. / ((gamma + 1.) * rho), (gamma - 1.) / (gamma + 1.) * pk
        root = np.sqrt(A / (p + B))
        return (p - pk) * root, root * (1. - 0.5 * (p - pk) / (B + p))
    ratio = p / pk
    value = 2. * c / (gamma - 1.) * (ratio ** ((gamma - 1.) / (2. * gamma)) - 1.)
    return value, ratio ** (-(gamma + 1.) / (2. * gamma)) / (rho * c)


def _sample_side(state: GasState, p_star: float, u_star: float, gamma: float, sign: float, xi: np.ndarray):

    rho_k, u_k, p_k = state
    c_k = _sound_speed(state, gamma)
    g1, g2 = (gamma - 1.) / (gamma + 1.), 2. / (gamma + 1.)
    rho, u, p = np.full_like(xi, rho_k), np.full_like(xi, u_k), np.full_like(xi, p_k)
    ratio = p_star / p_k
    if p_star > p_k:
        speed = u_k + sign * c_k * np.sqrt((gamma + 1.) / (2. * gamma) * ratio + (gamma - 1.) / (2. * gamma))
        star = sign * xi < sign * speed
        rho[star] = rho_k * (ratio + g1) / (g1 * ratio + 1.)
        u[star], p[star] = u_star, p_star
        return rho, u, p
    head = u_k + sign * c_k
    c_star = c_k * ratio ** ((gamma - 1.) / (2. * gamma))
    tail = u_star + sign * c_star
    star = sign * xi <= sign * tail
    fan = (sign * xi > sign * tail) & (sign * xi < sign * head)
    rho[star] = rho_k * ratio ** (1. / gamma)
    u[star], p[star] = u_star, p_star
    base = g2 - sign * g1 * (u_k - xi[fan]) / c_k
    rho[fan] = rho_k * base ** (2. / (gamma - 1.))
    u[fan] = g2 * (-sign * c_k + 0.5 * (gamma - 1.) * u_k + xi[fan])
    p[fan] = p_k * base ** (2. * gamma / (gamma - 1.))
    return rho, u, p


def solve_riemann(left: GasState, right: GasState, gamma: float = 1.4, tolerance: float = 1e-14,
                  max_iterations: int = 100) -> RiemannSolution:
    """
    Newton iteration on the pressure function of the star region.

    :param left: Left (density, velocity, pressure).
    :param right: Right (density, velocity, pressure).
    :param gamma: Adiabatic index.
    :param tolerance: Relative pressure change stopping the iteration.
    :param max_iterations: Maximal number of Newton iterations before a ConvergenceError.
    """

    for state in (left, right):
        if not (state[0] > 0. and state[2] > 0.):
            raise ConfigError('riemann', f"Riemann states need positive density and pressure, got {state}.")
    left, right = tuple(float(v) for v in left), tuple(float(v) for v in right)
    c_l, c_r = _sound_speed(left, gamma), _sound_speed(right, gamma)
    du = right[1] - left[1]
    if 2. / (gamma - 1.) * (c_l + c_r) <= du:
        raise VacuumError(f"The states {left} and {right} generate vacuum.")

    # Two-rarefaction guess, always positive and exact when both waves are rarefactions
    z = (gamma - 1.) / (2. * gamma)
    p = ((c_l + c_r - 0.5 * (gamma - 1.) * du) / (c_l / left[2] ** z + c_r / right[2] ** z)) ** (1. / z)
    for _ in range(max_iterations):
        f_l, d_l = _pressure_function(p, left, gamma)
        f_r, d_r = _pressure_function(p, right, gamma)
        p_new = max(p - (f_l + f_r + du) / (d_l + d_r), 1e-14 * p)
        change = 2. * abs(p_new - p) / (p_new + p)
        p = p_new
        if change < tolerance:
            break
    else:
        raise ConvergenceError(f"The star pressure did not converge in {max_iterations} iterations.")
    f_l, _ = _pressure_function(p, left, gamma)
    f_r, _ = _pressure_function(p, right, gamma)
    return RiemannSolution(left=left, right=right, gamma=gamma, p_star=p,
                           u_star=0.5 * (left[1] + right[1]) + 0.5 * (f_r - f_l), residual=f_l + f_r + du)


def riemann_exact(left: GasState, right: GasState, gamma: float, xi) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Exact (density, velocity, pressure) of an ideal gas Riemann problem at xi = x / t.
    """

    return solve_riemann(left, right, gamma).sample(xi)


########################################################################################################################
# Sedov-Taylor blast wave

def _sedov_rhs(lam: float, y: np.ndarray, gamma: float) -> List[float]:
    """
    Self-similar reduced velocity f, density g and pressure h of the spherical blast, plus the energy integrand.
    """

    f, g, h, _ = y
    w = f - lam
    df = (1.5 * f * w * g - 3. * h + 2. * gamma * h * f / lam) / (w * w * g - gamma * h)
    dg = -(g * df + 2. * g * f / lam) / w
    dh = (3. * h - gamma * h * df - 2. * gamma * h * f / lam) / w
    return [df, dg, dh, (0.5 * g * f * f + h / (gamma - 1.)) * lam * lam]


@lru_cache(maxsize=None)
def _sedov_solution(gamma: float, lam_min: float = 1e-3):

    y0 = [2. / (gamma + 1.), (gamma + 1.) / (gamma - 1.), 2. / (gamma + 1.), 0.]
    sol = solve_ivp(_sedov_rhs, (1., lam_min), y0, method='LSODA', rtol=1e-10, atol=1e-12, args=(gamma,),
                    dense_output=True)
    if not sol.success:
        raise ConvergenceError(f"Sedov similarity integration failed for gamma = {gamma}: {sol.message}")
    integral = -float(sol.y[3, -1])
    return (25. / (16. * pi * integral)) ** 0.2, sol


def sedov_constant(gamma: float = 1.4) -> float:
    """
    Dimensionless shock radius xi0 of the spherical blast, R = xi0 (E t^2 / rho0)^(1/5).
    """

    return _sedov_solution(float(gamma))[0]


def sedov_shock_radius(E0: float, rho0: float, gamma: float, t: float) -> float:
    """
    Shock radius of a spherical blast of energy E0 in a gas of density rho0 at time t.
    """

    if not t > 0.:
        raise ConfigError('t', f"The blast radius needs t > 0, got {t}.")
    return sedov_constant(gamma) * (E0 * t * t / rho0) ** 0.2


def sedov_profile(E: float, rho0: float, gamma: float, t: float, r) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Density, radial velocity and pressure of the spherical blast at radii r.

    :param E: Blast energy.
    :param rho0: Ambient density.
    :param gamma: Adiabatic index.
    :param t: Time after the explosion.
    :param r: Radii.
    """

    r = np.atleast_1d(np.asarray(r, dtype=float))
    R = sedov_shock_radius(E, rho0, gamma, t)
    D = 0.4 * R / t
    _, sol = _sedov_solution(float(gamma))
    lam = r / R
    inside = lam < 1.
    f, g, h, _ = sol.sol(np.clip(lam, 1e-3, 1.))
    rho = np.where(inside, rho0 * g, rho0)
    u = np.where(inside, D * f, 0.)
    p = np.where(inside, rho0 * D * D * h, 0.)
    return rho, u, p


########################################################################################################################
# Planar Noh implosion

def noh_exact(rho0: float, gamma: float, t: float, x, inflow_speed: float = 1.) \
        -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Planar Noh solution: a cold gas hitting a wall at x = 0, the reflected shock standing at x_s = t u0 (gamma - 1) / 2.

    :param rho0: Upstream density.
    :param gamma: Adiabatic index.
    :param t: Time.
    :param x: Distances from the wall.
    :param inflow_speed: Upstream speed u0.
    """

    x = np.atleast_1d(np.asarray(x, dtype=float))
    shock = noh_shock_position(gamma, t, inflow_speed)
    rho_s, p_s = noh_post_shock(rho0, gamma, inflow_speed)
    behind = x < shock
    return (np.where(behind, rho_s, rho0),
            np.where(behind, 0., -inflow_speed),
            np.where(behind, p_s, 0.))


def noh_shock_position(gamma: float, t: float, inflow_speed: float = 1.) -> float:
    return t * inflow_speed * (gamma - 1.) / 2.


def noh_post_shock(rho0: float, gamma: float, inflow_speed: float = 1.) -> Tuple[float, float]:
    """
    Density and pressure behind the Noh shock, checked against the jump conditions.
    """

    rho = rho0 * (gamma + 1.) / (gamma - 1.)
    p = rho0 * inflow_speed ** 2 * (gamma + 1.) / 2.
    s = inflow_speed * (gamma - 1.) / 2.
    residuals = (rho0 * (-inflow_speed - s) + rho * s,
                 rho0 * (inflow_speed + s) * inflow_speed - p,
                 p / ((gamma - 1.) * rho) - 0.5 * p * (1. / rho0 - 1. / rho))
    scale = max(rho0 * inflow_speed, p, 1e-300)
    if max(abs(r) for r in residuals) > 1e-12 * scale:
        raise ConvergenceError(f"Noh jump conditions violated: residuals {residuals}.")
    return rho, p


########################################################################################################################
# Conservation audit

@dataclass(frozen=True)
class AuditTotals:
    mass: Tuple[float, ...]
    momentum: Tuple[float, float, float]
    internal_energy: float
    kinetic_energy: float

    @property
    def total_mass(self) -> float:
        return fsum(self.mass)

    @property
    def total_energy(self) -> float:
        return self.internal_energy + self.kinetic_energy


def _local_contributions(state: SimulationState) -> Dict[str, np.ndarray]:

    cells = (Ellipsis,) + state.cells
    owned = state.owned_vertices
    mass = state.mass.data[cells]
    m_v = state.vertex_mass.data[owned]
    u = state.u.data[(slice(None),) + owned]
    return {'mass': mass.reshape(mass.shape[0], -1),
            'internal': (mass * state.energy.data[cells]).ravel(),
            'momentum': (m_v * u).reshape(3, -1),
            'kinetic': (0.5 * m_v * (u ** 2).sum(axis=0)).ravel()}


def conservation_audit(state: SimulationState, transport: Optional[Transport] = None) -> AuditTotals:
    """
    Global totals of mass per material, momentum and energy. Every rank contributes the values of its interior cells
    and owned vertices; rank 0 sums them rank by rank and index by index with exact rounding, and broadcasts the result.

    :param state: State of the calling rank.
    :param transport: Transport of the rank group, None for a single rank.
    """

    local = _local_contributions(state)
    parts = [local] if transport is None else transport.gather(local, root=0)
    totals = None
    if parts is not None:
        M = local['mass'].shape[0]
        totals = AuditTotals(
            mass=tuple(fsum(np.concatenate([p['mass'][m] for p in parts])) for m in range(M)),
            momentum=tuple(fsum(np.concatenate([p['momentum'][a] for p in parts])) for a in range(3)),
            internal_energy=fsum(np.concatenate([p['internal'] for p in parts])),
            kinetic_energy=fsum(np.concatenate([p['kinetic'] for p in parts])))
    return totals if transport is None else transport.bcast(totals, root=0)


########################################################################################################################
# Parallel efficiency

@dataclass(frozen=True)
class ScalingRecord:
    """
    Wall time of one run of a scaling series.

    :param mode: 'strong' or 'weak'.
    :param ranks: Number of ranks n.
    :param wall_time: Measured time Time_n.
    """

    mode: str
    ranks: int
    wall_time: float

    def __post_init__(self):
        if self.mode not in SCALING_MODES:
            raise ConfigError('mode', f"Unknown scaling mode '{self.mode}', must be in {SCALING_MODES}.")


def efficiency(records: Sequence[ScalingRecord], mode: str) -> Dict[int, float]:
    """
    Parallel efficiency of every rank count: Time_1 / Time_n in weak scaling, Time_1 / (n Time_n) in strong scaling.

    :param records: Records of the series, one of them with a single rank.
    :param mode: 'strong' or 'weak'.
    """

    if mode not in SCALING_MODES:
        raise ConfigError('mode', f"Unknown scaling mode '{mode}', must be in {SCALING_MODES}.")
    series = {r.ranks: r.wall_time for r in records if r.mode == mode}
    if 1 not in series:
        raise MissingBaselineError(f"No single-rank record in the {mode} scaling series.")
    baseline = series[1]
    if mode == 'weak':
        return {n: baseline / t for n, t in sorted(series.items())}
    return {n: baseline / (n * t) for n, t in sorted(series.items())}
