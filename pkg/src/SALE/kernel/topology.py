from typing import Dict, List, Optional, Tuple
from dataclasses import dataclass, field
from itertools import product
from logging import getLogger
import numpy as np

from SALE.kernel.grid import BlockLayout
from SALE.kernel.errors import ContractError

logger = getLogger('SALE.kernel')

CLASSES = ('face', 'edge', 'corner')
Offset = Tuple[int, int, int]
Region = Tuple[slice, slice, slice]


@dataclass(frozen=True)
class Neighbor:
    rank: int
    offset: Offset
    kind: str
    weight: int


@dataclass
class NeighborTopology:
    """
    Neighbor graph of a rank: every existing block at offset -1, 0 or +1 along each active axis, self excluded.
    """

    layout: BlockLayout
    rank: int
    neighbors: List[Neighbor] = field(default_factory=list)

    @property
    def ranks(self) -> List[int]:
        return [n.rank for n in self.neighbors]

    @property
    def weights(self) -> List[int]:
        return [n.weight for n in self.neighbors]

    def count(self, kind: str) -> int:
        return sum(1 for n in self.neighbors if n.kind == kind)

    def by_offset(self, offset: Offset) -> Optional[Neighbor]:
        for n in self.neighbors:
            if n.offset == offset:
                return n
        return None


def neighbor_class(offset: Offset) -> str:
    return CLASSES[sum(1 for o in offset if o != 0) - 1]


def _cell_extent(interior: Tuple[int, int, int], ghosts: Tuple[int, int, int], offset: Offset) -> int:

    count = 1
    for n, g, o in zip(interior, ghosts, offset):
        count *= g if o != 0 else n
    return count


def build_topology(layout: BlockLayout,
                   rank: int,
                   weights: Optional[Dict[str, int]] = None) -> NeighborTopology:
    """
    Build the non-periodic neighbor graph of a rank.

    :param layout: Domain decomposition.
    :param rank: Rank whose neighborhood is built.
    :param weights: Optional communication weight per neighbor class. Defaults to the cell message size towards each
                    neighbor (N^2, N and 1 for a cubic block of side N).
    """

    coords = layout.coords(rank)
    interior, ghosts = layout.block_shape(rank), layout.ghosts()
    axis_offsets = [(-1, 0, 1) if active else (0,) for active in layout.active_axes]
    topology = NeighborTopology(layout=layout, rank=rank)
    for offset in product(*axis_offsets):
        if offset == (0, 0, 0):
            continue
        other = tuple(c + o for c, o in zip(coords, offset))
        if any(not 0 <= c < p for c, p in zip(other, layout.ranks_per_axis)):
            continue
        kind = neighbor_class(offset)
        weight = weights[kind] if weights is not None else _cell_extent(interior, ghosts, offset)
        topology.neighbors.append(Neighbor(rank=layout.rank_of(other), offset=offset, kind=kind, weight=int(weight)))
    logger.debug(f"Rank {rank}: {len(topology.neighbors)} neighbors "
                 f"({', '.join(f'{topology.count(k)} {k}' for k in CLASSES)})")
    return topology


@dataclass(frozen=True)
class Message:
    neighbor: Neighbor
    send: Region
    recv: Region
    count: int


@dataclass
class CommSchedule:
    """
    Send and receive regions of a field towards every neighbor of a topology.
    """

    topology: NeighborTopology
    centering: str
    storage_shape: Tuple[int, int, int]
    messages: List[Message] = field(default_factory=list)

    def count(self, kind: str) -> int:
        counts = [m.count for m in self.messages if m.neighbor.kind == kind]
        return counts[0] if counts else 0

    def counts(self) -> Dict[int, int]:
        return {m.neighbor.rank: m.count for m in self.messages}


def _axis_regions(n: int, g: int, offset: int, vertex: bool) -> Tuple[slice, slice]:

    if offset == 0:
        span = slice(g, g + n + (1 if vertex else 0))
        return span, span
    # Vertex planes on block interfaces are replicated: the first plane past the shared one is exchanged
    if offset > 0:
        send = slice(n, g + n)
        recv = slice(g + n + 1, g + n + 1 + g) if vertex else slice(g + n, g + n + g)
    else:
        send = slice(g + 1, g + 1 + g) if vertex else slice(g, g + g)
        recv = slice(0, g)
    return send, recv


def build_schedule(topology: NeighborTopology, centering: str = 'cell') -> CommSchedule:
    """
    Compute, for each neighbor, the strip of interior data sent to it and the ghost strip filled from it.

    :param topology: Neighbor graph of the rank.
    :param centering: 'cell' or 'vertex'.
    """

    if centering not in ('cell', 'vertex'):
        raise ContractError(f"Unknown centering '{centering}'.")
    layout, vertex = topology.layout, centering == 'vertex'
    interior, ghosts = layout.block_shape(topology.rank), layout.ghosts()
    storage = tuple(n + (1 if vertex and g else 0) + 2 * g if a else 1
                    for n, g, a in zip(interior, ghosts, layout.active_axes))
    schedule = CommSchedule(topology=topology, centering=centering, storage_shape=storage)
    for neighbor in topology.neighbors:
        send, recv = [], []
        for axis in range(3):
            if not layout.active_axes[axis]:
                send.append(slice(0, 1))
                recv.append(slice(0, 1))
                continue
            s, r = _axis_regions(interior[axis], ghosts[axis], neighbor.offset[axis], vertex)
            send.append(s)
            recv.append(r)
        count = int(np.prod([s.stop - s.start for s in send]))
        schedule.messages.append(Message(neighbor=neighbor, send=tuple(send), recv=tuple(recv), count=count))
    return schedule
