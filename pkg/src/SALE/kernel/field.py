from typing import Optional, Tuple
import numpy as np

from SALE.kernel.grid import BlockLayout
from SALE.kernel.errors import ContractError

CENTERINGS = ('cell', 'vertex')


class _ExchangeGuard:
    """
    Exchanges in flight on a field and its single-material views. The whole field conflicts with every view, a view
    only with itself.
    """

    def __init__(self):
        self.held = set()

    def conflicts(self, key: Optional[int]) -> bool:
        return None in self.held or key in self.held or (key is None and bool(self.held))


class Field:

    def __init__(self,
                 layout: BlockLayout,
                 rank: int,
                 centering: str = 'cell',
                 material_count: Optional[int] = None,
                 components: Optional[int] = None,
                 name: str = '',
                 data: Optional[np.ndarray] = None):
        """
        Block-local array framed by ghost cells. A material axis (or a component axis for vectors) is prepended to
        the three spatial axes when requested.

        :param layout: Decomposition the field belongs to.
        :param rank: Rank owning the block.
        :param centering: 'cell' or 'vertex'.
        :param material_count: Number of materials of a multi-material field.
        :param components: Number of components of a vector field.
        :param name: Name of the physical quantity.
        :param data: Existing storage to alias instead of allocating.
        """

        if centering not in CENTERINGS:
            raise ContractError(f"Unknown centering '{centering}', must be in {CENTERINGS}.")
        if material_count is not None and components is not None:
            raise ContractError("A field carries either a material axis or a component axis, not both.")
        for label, count in (('material_count', material_count), ('components', components)):
            if count is not None and int(count) < 1:
                raise ContractError(f"{label} must be a positive integer, got {count}.")
        layout.check_rank(rank)

        self.__layout = layout
        self.__rank = rank
        self.__centering = centering
        self.__material_count = material_count
        self.__components = components
        self.__guard = _ExchangeGuard()
        self.__key: Optional[int] = None
        self.name = name

        shape = self.leading_shape + self.storage_shape
        if data is None:
            data = np.zeros(shape, dtype=np.float64)
        elif data.shape != shape:
            raise ContractError(f"Storage of shape {data.shape} does not match the expected shape {shape}.")
        self.data = data

    @property
    def layout(self) -> BlockLayout:
        return self.__layout

    @property
    def rank(self) -> int:
        return self.__rank

    @property
    def centering(self) -> str:
        return self.__centering

    @property
    def material_count(self) -> Optional[int]:
        return self.__material_count

    @property
    def components(self) -> Optional[int]:
        return self.__components

    @property
    def leading_shape(self) -> Tuple[int, ...]:
        if self.__material_count is not None:
            return self.__material_count,
        if self.__components is not None:
            return self.__components,
        return ()

    @property
    def interior_shape(self) -> Tuple[int, int, int]:
        extra = 1 if self.__centering == 'vertex' else 0
        return tuple(n + extra if active else 1
                     for n, active in zip(self.__layout.block_shape(self.__rank), self.__layout.active_axes))

    @property
    def storage_shape(self) -> Tuple[int, int, int]:
        return tuple(n + 2 * g for n, g in zip(self.interior_shape, self.__layout.ghosts()))

    @property
    def interior_slices(self) -> Tuple[slice, slice, slice]:
        return tuple(slice(g, g + n) for n, g in zip(self.interior_shape, self.__layout.ghosts()))

    @property
    def interior(self) -> np.ndarray:
        return self.data[(Ellipsis,) + self.interior_slices]

    @property
    def is_open(self) -> bool:
        return self.__guard.conflicts(self.__key)

    def acquire(self) -> None:
        if self.__guard.conflicts(self.__key):
            raise ContractError(f"Field '{self.name}' already has an exchange in flight.")
        self.__guard.held.add(self.__key)

    def release(self) -> None:
        self.__guard.held.discard(self.__key)

    def select(self, index: int) -> 'Field':
        """
        Single-material (or single-component) field aliasing one slab of the leading axis.

        :param index: Index along the leading axis.
        """

        if not self.leading_shape:
            raise ContractError(f"Field '{self.name}' has no leading axis to select from.")
        view = Field(self.__layout, self.__rank, self.__centering, name=f'{self.name}[{index}]', data=self.data[index])
        view.__guard, view.__key = self.__guard, index
        return view

    def fill(self, value: float) -> 'Field':
        self.data[...] = value
        return self

    def __repr__(self):
        return f"Field('{self.name}', {self.__centering}, shape={self.data.shape}, rank={self.__rank})"


def allocate_field(layout: BlockLayout,
                   rank: int,
                   centering: str = 'cell',
                   material_count: Optional[int] = None,
                   components: Optional[int] = None,
                   name: str = '') -> Field:
    """
    Allocate a zero-initialized, ghost-framed field on the block of a rank.
    """

    return Field(layout, rank, centering, material_count=material_count, components=components, name=name)


def interior_view(field: Field) -> np.ndarray:
    """
    Writable view of the interior region (no copy).
    """

    return field.interior
