"""
Hexahedral cell geometry on the staggered grid.

Corners of a cell are numbered c = i + 2j + 4k, (i, j, k) being the local offsets of the corner along each axis. A cell
on an inert axis has unit thickness: its high corners along that axis are the low corners shifted by 1.

Volumes are computed with the divergence theorem over the six faces, each quadrilateral face being split into two
triangles. The split diagonal of a face joins the two corners whose local parity equals the face parity. Cells use the
parity (I + J + K) % 2 of their global index, which always selects the diagonals joining globally even vertices: two
cells sharing a face split it the same way, which is the 5-tetrahedra decomposition of the hexahedron.
"""

from typing import List, Sequence, Tuple, Union
import numpy as np

from SALE.kernel.grid import BlockLayout
from SALE.kernel.field import Field
from SALE.kernel.errors import TangledMeshError

Parity = Union[int, np.ndarray]

# Outward oriented faces, ordered (axis, side): x-lo, x-hi, y-lo, y-hi, z-lo, z-hi
FACES = ((0, 4, 6, 2), (1, 3, 7, 5),
         (0, 1, 5, 4), (2, 6, 7, 3),
         (0, 2, 3, 1), (4, 5, 7, 6))
CORNER_PARITY = tuple(bin(c).count('1') % 2 for c in range(8))


def corner_bits(corner: int) -> Tuple[int, int, int]:
    return corner & 1, (corner >> 1) & 1, (corner >> 2) & 1


def cell_shape_of(vertex_shape: Sequence[int], active: Sequence[bool]) -> Tuple[int, int, int]:
    return tuple(n - 1 if a else n for n, a in zip(vertex_shape, active))


def corner_slices(cell_shape: Sequence[int], active: Sequence[bool]) -> List[Tuple[slice, slice, slice]]:
    """
    For each corner, the slices of vertex storage holding that corner of every storage cell.
    """

    slices = []
    for c in range(8):
        slices.append(tuple(slice(b, b + n) if a else slice(0, 1)
                            for b, n, a in zip(corner_bits(c), cell_shape, active)))
    return slices


def corner_values(values: np.ndarray, active: Sequence[bool]) -> List[np.ndarray]:
    """
    Vertex values gathered at the 8 corners of every cell spanned by the vertex array.

    :param values: Vertex array of shape (..., VX, VY, VZ).
    :param active: Active axes of the grid.
    """

    slices = corner_slices(cell_shape_of(values.shape[-3:], active), active)
    return [values[(Ellipsis,) + sl] for sl in slices]


def cell_corners(x: np.ndarray, active: Sequence[bool]) -> List[np.ndarray]:
    """
    Positions of the 8 corners of every cell spanned by the vertex positions, with unit thickness on inert axes.

    :param x: Vertex positions of shape (3, VX, VY, VZ).
    :param active: Active axes of the grid.
    """

    corners = corner_values(x, active)
    for c in range(8):
        shift = [0. if a else float(b) for b, a in zip(corner_bits(c), active)]
        if any(shift):
            corners[c] = corners[c] + np.array(shift).reshape(3, 1, 1, 1)
    return corners


def scatter_to_vertices(per_corner: Sequence[np.ndarray],
                        vertex_shape: Sequence[int],
                        active: Sequence[bool]) -> np.ndarray:
    """
    Accumulate per-corner cell contributions onto the vertices they belong to.

    :param per_corner: 8 arrays of shape (..., CX, CY, CZ).
    :param vertex_shape: Spatial shape of the vertex storage.
    :param active: Active axes of the grid.
    """

    lead = per_corner[0].shape[:-3]
    out = np.zeros(lead + tuple(vertex_shape))
    for values, sl in zip(per_corner, corner_slices(per_corner[0].shape[-3:], active)):
        out[(Ellipsis,) + sl] += values
    return out


def _triple(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return (a[0] * (b[1] * c[2] - b[2] * c[1]) +
            a[1] * (b[2] * c[0] - b[0] * c[2]) +
            a[2] * (b[0] * c[1] - b[1] * c[0]))


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack((a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]))


def _triangles(face: Tuple[int, int, int, int]):
    p0, p1, p2, p3 = face
    return ((p0, p1, p2), (p0, p2, p3)), ((p1, p2, p3), (p1, p3, p0))


def hex_volume(corners: Sequence[np.ndarray], parities: Sequence[Parity]) -> np.ndarray:
    """
    Signed volume of hexahedra given their 8 corners and the split parity of each of their 6 faces.

    :param corners: 8 arrays of shape (3, ...).
    :param parities: One parity (scalar or array) per face, in the order of FACES.
    """

    r = [c - corners[0] for c in corners]
    six_volume = np.zeros(r[0].shape[1:])
    for face, parity in zip(FACES, parities):
        first, second = _triangles(face)
        a = sum(_triple(r[i], r[j], r[k]) for i, j, k in first)
        b = sum(_triple(r[i], r[j], r[k]) for i, j, k in second)
        six_volume += np.where(CORNER_PARITY[face[0]] == parity, a, b)
    return six_volume / 6.


def hex_gradients(corners: Sequence[np.ndarray], parities: Sequence[Parity]) -> List[np.ndarray]:
    """
    Derivative of the hexahedron volume with respect to each corner position (area-weighted corner normals).
    The 8 gradients of a cell sum to zero.

    :param corners: 8 arrays of shape (3, ...).
    :param parities: One parity per face, in the order of FACES.
    """

    r = [c - corners[0] for c in corners]
    grads = [np.zeros_like(r[0]) for _ in range(8)]
    for face, parity in zip(FACES, parities):
        select = np.asarray(CORNER_PARITY[face[0]] == parity)
        for mask, triangles in zip((select, ~select), _triangles(face)):
            for i, j, k in triangles:
                grads[i] += np.where(mask, _cross(r[j], r[k]), 0.)
                grads[j] += np.where(mask, _cross(r[k], r[i]), 0.)
                grads[k] += np.where(mask, _cross(r[i], r[j]), 0.)
    return [g / 6. for g in grads]


def min_edge_length(corners: Sequence[np.ndarray], active: Sequence[bool]) -> np.ndarray:
    """
    Shortest edge of each cell along the active axes.
    """

    lengths = []
    for axis, a in enumerate(active):
        if not a:
            continue
        for c in range(8):
            if not (c >> axis) & 1:
                d = corners[c | (1 << axis)] - corners[c]
                lengths.append(np.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2))
    return np.minimum.reduce(lengths)


def cell_parity(layout: BlockLayout, rank: int) -> np.ndarray:
    """
    Global parity (I + J + K) % 2 of every storage cell of a block.
    """

    offset = layout.cell_offset(rank)
    shape = tuple(n + 2 * g for n, g in zip(layout.block_shape(rank), layout.ghosts()))
    indices = np.ix_(*(o + np.arange(n) for o, n in zip(offset, shape)))
    return (indices[0] + indices[1] + indices[2]) % 2


def cell_volumes(x: np.ndarray, parity: Parity, active: Sequence[bool]) -> np.ndarray:
    """
    Volume of every storage cell.

    :param x: Vertex positions of shape (3, VX, VY, VZ).
    :param parity: Global cell parity (see cell_parity).
    :param active: Active axes of the grid.
    """

    return hex_volume(cell_corners(x, active), [parity] * 6)


def cell_geometry(vertex_positions: Field, parity: Parity = None) -> Field:
    """
    Per-cell volume field computed from a 3-component vertex position field. Interior cells must not be inverted.

    :param vertex_positions: Vertex positions.
    :param parity: Global cell parity, computed from the layout when not given.
    """

    layout, rank = vertex_positions.layout, vertex_positions.rank
    parity = cell_parity(layout, rank) if parity is None else parity
    volume = Field(layout, rank, 'cell', name='volume')
    volume.data[...] = cell_volumes(vertex_positions.data, parity, layout.active_axes)
    check_volumes(volume)
    return volume


def check_volumes(volume: Field) -> None:
    """
    Raise a TangledMeshError carrying the global index of the first non-positive interior volume.
    """

    interior = volume.interior
    if np.all(interior > 0.):
        return
    local = tuple(int(i) for i in np.argwhere(~(interior > 0.))[0])
    lo = [r[0] for r in volume.layout.block_range(volume.rank)]
    cell = tuple(l + i for l, i in zip(lo, local))
    raise TangledMeshError(cell=cell, volume=float(interior[local]))
