from typing import Tuple, Sequence
from dataclasses import dataclass
from logging import getLogger
import numpy as np

from SALE.kernel.errors import ConfigError, ContractError

logger = getLogger('SALE.kernel')

Triple = Tuple[int, int, int]
Range = Tuple[int, int]


@dataclass(frozen=True)
class GlobalGrid:
    """
    Global Cartesian cell grid. Axes with a single cell are inert.

    :param cells_per_axis: Number of cells along each of the three axes.
    :param domain_extent: Physical length of the domain along each axis.
    """

    cells_per_axis: Triple
    domain_extent: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):

        if len(self.cells_per_axis) != 3 or len(self.domain_extent) != 3:
            raise ConfigError('cells', "Grid sizes and extents must have exactly 3 entries.")
        if any(int(n) < 1 for n in self.cells_per_axis):
            raise ConfigError('cells', f"Cell counts must be positive, got {self.cells_per_axis}.")
        if any(float(L) <= 0. for L in self.domain_extent):
            raise ConfigError('extent', f"Domain extents must be positive, got {self.domain_extent}.")
        object.__setattr__(self, 'cells_per_axis', tuple(int(n) for n in self.cells_per_axis))
        object.__setattr__(self, 'domain_extent', tuple(float(L) for L in self.domain_extent))

    @property
    def active_axes(self) -> Tuple[bool, bool, bool]:
        return tuple(n > 1 for n in self.cells_per_axis)

    @property
    def dimensionality(self) -> int:
        return sum(self.active_axes)

    @property
    def spacing(self) -> Tuple[float, float, float]:
        """
        Undeformed cell size. Inert axes report the unit thickness.
        """

        return tuple(L / n if a else 1.0
                     for L, n, a in zip(self.domain_extent, self.cells_per_axis, self.active_axes))

    @property
    def volume(self) -> float:
        return float(np.prod([L if a else 1.0 for L, a in zip(self.domain_extent, self.active_axes)]))


@dataclass(frozen=True)
class BlockLayout:
    """
    Partition of a GlobalGrid into per-rank blocks framed by ghost cells.

    :param grid: The decomposed grid.
    :param ranks_per_axis: Number of blocks along each axis.
    :param ranges: For each axis, the inclusive global cell range of each block along that axis.
    :param ghost_width: Width of the ghost frame on active axes.
    """

    grid: GlobalGrid
    ranks_per_axis: Triple
    ranges: Tuple[Tuple[Range, ...], Tuple[Range, ...], Tuple[Range, ...]]
    ghost_width: int = 1

    @property
    def nranks(self) -> int:
        return int(np.prod(self.ranks_per_axis))

    @property
    def active_axes(self) -> Tuple[bool, bool, bool]:
        return self.grid.active_axes

    def check_rank(self, rank: int) -> None:

        if not 0 <= rank < self.nranks:
            raise ContractError(f"Rank {rank} is not valid for a layout of {self.nranks} ranks.")

    def coords(self, rank: int) -> Triple:
        self.check_rank(rank)
        return tuple(int(c) for c in np.unravel_index(rank, self.ranks_per_axis))

    def rank_of(self, coords: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(coords), self.ranks_per_axis))

    def block_range(self, rank: int) -> Tuple[Range, Range, Range]:
        """
        Inclusive global cell index range of the block along each axis.

        :param rank: Rank owning the block.
        """

        coords = self.coords(rank)
        return tuple(self.ranges[axis][coords[axis]] for axis in range(3))

    def block_shape(self, rank: int) -> Triple:
        return tuple(hi - lo + 1 for lo, hi in self.block_range(rank))

    def ghost(self, axis: int) -> int:
        return self.ghost_width if self.active_axes[axis] else 0

    def ghosts(self) -> Triple:
        return tuple(self.ghost(axis) for axis in range(3))

    def touches_boundary(self, rank: int, axis: int, side: int) -> bool:
        """
        Whether the block lies on the physical domain boundary.

        :param rank: Rank owning the block.
        :param axis: Axis index.
        :param side: 0 for the low face, 1 for the high face.
        """

        if not self.active_axes[axis]:
            return False
        coord = self.coords(rank)[axis]
        return coord == 0 if side == 0 else coord == self.ranks_per_axis[axis] - 1

    def cell_offset(self, rank: int) -> Triple:
        """
        Global index of the storage cell (0, 0, 0) of the block, ghosts included.
        """

        return tuple(lo - self.ghost(axis) for axis, (lo, _) in enumerate(self.block_range(rank)))


def decompose_domain(grid: GlobalGrid,
                     ranks_per_axis: Sequence[int],
                     ghost_width: int = 1) -> BlockLayout:
    """
    Split the grid into near-equal blocks, giving the remainder cells to the lowest-index blocks.

    :param grid: Global grid to decompose.
    :param ranks_per_axis: Number of blocks along each axis.
    :param ghost_width: Ghost frame width.
    """

    if len(ranks_per_axis) != 3:
        raise ConfigError('ranks', f"Expected 3 rank counts, got {ranks_per_axis}.")
    ranks_per_axis = tuple(int(p) for p in ranks_per_axis)
    if any(p < 1 for p in ranks_per_axis):
        raise ConfigError('ranks', f"Rank counts must be positive, got {ranks_per_axis}.")
    if ghost_width < 1:
        raise ConfigError('ghost_width', f"Ghost width must be at least 1, got {ghost_width}.")

    ranges = []
    for axis, (n, p) in enumerate(zip(grid.cells_per_axis, ranks_per_axis)):
        if not grid.active_axes[axis]:
            if p != 1:
                raise ConfigError('ranks', f"Axis {axis} is inert and cannot be split into {p} blocks.")
            ranges.append(((0, 0),))
            continue
        if n < 2 * p:
            raise ConfigError('ranks', f"Splitting {n} cells into {p} blocks on axis {axis} leaves blocks with "
                                       f"less than 2 cells.")
        base, remainder = divmod(n, p)
        axis_ranges, lo = [], 0
        for b in range(p):
            size = base + 1 if b < remainder else base
            axis_ranges.append((lo, lo + size - 1))
            lo += size
        ranges.append(tuple(axis_ranges))

    layout = BlockLayout(grid=grid, ranks_per_axis=ranks_per_axis, ranges=tuple(ranges), ghost_width=ghost_width)
    logger.debug(f"Decomposed grid {grid.cells_per_axis} over {ranks_per_axis} ranks "
                 f"(block sizes {[sorted({hi - lo + 1 for lo, hi in r}) for r in ranges]})")
    return layout
