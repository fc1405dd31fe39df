from typing import Sequence, Tuple, Union, Optional
from dataclasses import dataclass, field
import numpy as np

from SALE.kernel.errors import ConfigError, DegenerateStateError, EmptyCellError

Real = Union[float, np.ndarray]
NOMINAL_STRENGTH = {'shear0': 1., 'gp': 1., 'gt': 0., 'y0': 0.01, 'beta': 12., 'n': 0.1, 'ymax': 0.05}


@dataclass(frozen=True)
class Material:
    """
    Ideal gas with optional Steinberg strength constants.

    :param name: Material name.
    :param gamma: Adiabatic index.
    :param rho0: Reference density.
    :param shear0: Reference shear modulus G0 (0 disables strength).
    :param gp: Pressure derivative of the shear modulus.
    :param gt: Temperature derivative of the shear modulus.
    :param y0: Reference yield stress.
    :param beta: Hardening coefficient.
    :param n: Hardening exponent.
    :param ymax: Maximum yield stress.
    :param cv: Specific heat, T = e / cv.
    """

    name: str = 'gas'
    gamma: float = 1.4
    rho0: float = 1.0
    shear0: float = 0.
    gp: float = 0.
    gt: float = 0.
    y0: float = 0.
    beta: float = 0.
    n: float = 0.
    ymax: float = 0.
    cv: float = 1.

    def __post_init__(self):

        if not self.gamma > 1.:
            raise ConfigError('gamma', f"Material '{self.name}' needs gamma > 1, got {self.gamma}.")
        if not self.ymax >= self.y0 >= 0.:
            raise ConfigError('ymax', f"Material '{self.name}' needs ymax >= y0 >= 0, got {self.ymax}, {self.y0}.")

    @property
    def has_strength(self) -> bool:
        return self.shear0 > 0.


@dataclass(frozen=True)
class MaterialSet:
    materials: Tuple[Material, ...]

    def __post_init__(self):
        if len(self.materials) == 0:
            raise ConfigError('materials', "At least one material is required.")
        object.__setattr__(self, 'materials', tuple(self.materials))

    def __len__(self):
        return len(self.materials)

    def __getitem__(self, m: int) -> Material:
        return self.materials[m]

    @property
    def count(self) -> int:
        return len(self.materials)

    @property
    def gammas(self) -> np.ndarray:
        """
        Adiabatic indices shaped for broadcasting against material fields.
        """

        return np.array([m.gamma for m in self.materials]).reshape(-1, 1, 1, 1)

    @property
    def has_strength(self) -> bool:
        return any(m.has_strength for m in self.materials)

    @classmethod
    def ideal_gases(cls, gammas: Sequence[float], strength: bool = False) -> 'MaterialSet':
        """
        Ideal gases of the given adiabatic indices, with the nominal strength constants when requested.
        """

        constants = NOMINAL_STRENGTH if strength else {}
        return cls(tuple(Material(name=f'gas{i}', gamma=g, **constants) for i, g in enumerate(gammas)))


@dataclass
class CellThermo:
    """
    Multi-material thermodynamic state of one cell (or of a block of cells, the material axis first). The mixed
    pressure and sound speed are filled by evaluate_cell.
    """

    fractions: np.ndarray
    densities: np.ndarray
    energies: np.ndarray
    temperature: Real = 0.
    temperature_init: Real = 0.
    plastic_strain: Real = 0.
    masses: Optional[np.ndarray] = field(default=None)
    pressure: Optional[Real] = None
    sound_speed: Optional[Real] = None


def eos_pressure(rho: Real, e: Real, gamma: Real) -> Real:
    """
    Ideal gas pressure p = (gamma - 1) rho e.
    """

    return (gamma - 1.) * rho * e


def eos_energy(rho: Real, p: Real, gamma: Real) -> Real:
    """
    Specific internal energy of an ideal gas at given density and pressure.
    """

    if np.any(np.asarray(rho) == 0.):
        raise DegenerateStateError("Specific energy is undefined at zero density.")
    return p / ((gamma - 1.) * rho)


def sound_speed(rho: Real, p: Real, gamma: Real) -> Real:
    """
    Adiabatic sound speed, zero for non-positive pressure.
    """

    if np.any(np.asarray(rho) == 0.):
        raise DegenerateStateError("Sound speed is undefined at zero density.")
    return np.sqrt(gamma * np.maximum(p, 0.) / rho)


def steinberg_shear(material: Material, p: Real, rho: Real, rho0: Real, T: Real, T_init: Real) -> Real:
    """
    Steinberg shear modulus G0 + GP p eta^(1/3) + GT (T - T_init), with eta = rho0 / rho.
    """

    eta = rho0 / rho
    return material.shear0 + material.gp * p * eta ** (1. / 3.) + material.gt * (T - T_init)


def steinberg_yield(material: Material, plastic_strain: Real, shear: Real, shear0: float) -> Real:
    """
    Steinberg yield stress min(Y0 (1 + beta eps_p)^N, Ymax) shear / G0.
    """

    hardening = material.y0 * (1. + material.beta * plastic_strain) ** material.n
    return np.minimum(hardening, material.ymax) * (shear / shear0)


def material_pressures(densities: np.ndarray, energies: np.ndarray, materials: MaterialSet) -> np.ndarray:
    gammas = np.array([m.gamma for m in materials.materials]).reshape((-1,) + (1,) * (densities.ndim - 1))
    return eos_pressure(densities, energies, gammas)


def mixed_cell_pressure(cell: CellThermo, materials: MaterialSet) -> Real:
    """
    Volume-fraction weighted pressure of a multi-material cell, each material using its own EoS.

    :param cell: Fractions, densities and energies, material axis first.
    :param materials: Material definitions.
    """

    fractions = np.asarray(cell.fractions, dtype=float)
    if np.any(np.all(fractions == 0., axis=0)):
        raise EmptyCellError("A cell has no material (all volume fractions are zero).")
    pressures = material_pressures(np.asarray(cell.densities, dtype=float),
                                   np.asarray(cell.energies, dtype=float), materials)
    p = fractions[0] * pressures[0]
    for m in range(1, materials.count):
        p = p + fractions[m] * pressures[m]
    return p


def mixed_cell_sound_speed(cell: CellThermo, materials: MaterialSet) -> Real:
    """
    Largest sound speed among the materials present in the cell.
    """

    fractions = np.asarray(cell.fractions, dtype=float)
    densities = np.asarray(cell.densities, dtype=float)
    pressures = material_pressures(densities, np.asarray(cell.energies, dtype=float), materials)
    present = (fractions > 0.) & (densities > 0.)
    c = np.zeros(fractions.shape[1:])
    for m, material in enumerate(materials.materials):
        safe = np.where(present[m], densities[m], 1.)
        c_m = np.sqrt(material.gamma * np.maximum(pressures[m], 0.) / safe)
        c = np.maximum(c, np.where(present[m], c_m, 0.))
    return c


def evaluate_cell(cell: CellThermo, materials: MaterialSet) -> CellThermo:
    """
    Close the cell record: mixed pressure and sound speed from the material states.
    """

    cell.pressure = mixed_cell_pressure(cell, materials)
    cell.sound_speed = mixed_cell_sound_speed(cell, materials)
    return cell
