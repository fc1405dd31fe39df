from itertools import product
from time import perf_counter
import numpy as np
import pytest

from SALE.kernel.field import CENTERINGS, allocate_field
from SALE.kernel.topology import build_topology
from SALE.kernel.transport import InProcessHub
from SALE.kernel.exchange import Exchanger, exchange_start, exchange_finish, exchange_blocking
from SALE.kernel.errors import ContractError, TransportError

FIELD_KINDS = [{}, {'material_count': 2}, {'components': 3}]


def global_index(field, blocks):
    """
    Global indices of every storage entry of a field, cells and vertices sharing the same storage offset.
    """

    offset = blocks.cell_offset(field.rank)
    return np.meshgrid(*(o + np.arange(n) for o, n in zip(offset, field.storage_shape)), indexing='ij')


def test_two_rank_line(layout, run_ranks):

    blocks = layout((6, 1, 1), (2, 1, 1))

    def work(transport):
        field = allocate_field(blocks, transport.rank, name='density')
        field.interior[:, 0, 0] = np.arange(1., 4.) + 3 * transport.rank
        exchanger = Exchanger(build_topology(blocks, transport.rank), transport)
        exchanger.blocking(field)
        return field.data[:, 0, 0].copy(), exchanger.counters.snapshot()

    (left, left_counts), (right, right_counts) = run_ranks(2, work)
    assert left[-1] == 4. and left[0] == 0.
    assert right[0] == 3. and right[-1] == 0.
    assert left_counts['calls'] == 1 and left_counts['messages_face'] == 1
    assert left_counts['bytes_face'] == 8 and left_counts['bytes_edge'] == 0


def test_single_rank_counts_the_call(layout, single_exchanger):

    blocks = layout((4, 4, 1))
    exchanger = single_exchanger(blocks)
    field = allocate_field(blocks, 0)
    field.interior[...] = 1.
    before = field.data.copy()
    exchanger.blocking(field)
    np.testing.assert_array_equal(field.data, before)
    assert exchanger.counters.snapshot() == {'calls': 1, 'bytes_face': 0, 'bytes_edge': 0, 'bytes_corner': 0,
                                             'messages_face': 0, 'messages_edge': 0, 'messages_corner': 0}


def global_values(field, blocks):
    """
    Value of every storage entry in a global array holding 1 + i + 10 j + 100 k (+ 1000 per leading slab).
    """

    I, J, K = global_index(field, blocks)
    values = 1. + I + 10. * J + 100. * K
    if field.leading_shape:
        values = values + 1000. * np.arange(field.leading_shape[0]).reshape(-1, 1, 1, 1)
    return values


@pytest.mark.parametrize('ranks', list(product((1, 2, 3), repeat=3)))
@pytest.mark.parametrize('centering', CENTERINGS)
def test_every_in_domain_ghost_matches_its_owner(layout, run_ranks, centering, ranks):

    blocks = layout((6, 6, 6), ranks)
    extent = [n + (centering == 'vertex') for n in blocks.grid.cells_per_axis]

    def work(transport):
        exchanger = Exchanger(build_topology(blocks, transport.rank), transport)
        fields = [allocate_field(blocks, transport.rank, centering, **kind) for kind in FIELD_KINDS]
        for field in fields:
            field.interior[...] = global_values(field, blocks)[(Ellipsis,) + field.interior_slices]
        exchanger.exchange(fields)
        results = []
        for field in fields:
            I, J, K = global_index(field, blocks)
            inside = (I >= 0) & (J >= 0) & (K >= 0) & (I < extent[0]) & (J < extent[1]) & (K < extent[2])
            results.append(np.array_equal(field.data[..., inside], global_values(field, blocks)[..., inside]))
            results.append(np.all(field.data[..., ~inside] == 0.))
        return all(results)

    assert all(run_ranks(blocks.nranks, work))


def test_ghosts_hold_the_rank_of_their_owner(layout, run_ranks):

    blocks = layout((4, 4, 4), (2, 2, 2))

    def work(transport):
        field = allocate_field(blocks, transport.rank)
        field.interior[...] = transport.rank
        Exchanger(build_topology(blocks, transport.rank), transport).blocking(field)
        I, J, K = global_index(field, blocks)
        inside = (I >= 0) & (J >= 0) & (K >= 0) & (I < 4) & (J < 4) & (K < 4)
        owners = np.ravel_multi_index((I[inside] // 2, J[inside] // 2, K[inside] // 2), (2, 2, 2))
        return np.array_equal(field.data[inside], owners)

    assert all(run_ranks(8, work))


def random_layout(rng):
    """
    Random 1D, 2D or 3D grid of at most 8 cells per axis split over at most 2 ranks per axis.
    """

    dimensions = int(rng.choice([1, 2, 3], p=[0.2, 0.3, 0.5]))
    cells, ranks = [], []
    for axis in range(3):
        if axis >= dimensions:
            cells.append(1)
            ranks.append(1)
        else:
            ranks.append(int(rng.integers(1, 3)))
            cells.append(int(rng.integers(2 * ranks[-1], 9)))
    return tuple(cells), tuple(ranks)


@pytest.mark.parametrize('trial', range(100))
def test_nonblocking_matches_blocking(layout, run_ranks, trial):

    rng = np.random.default_rng(trial)
    blocks = layout(*random_layout(rng))
    kinds = [(CENTERINGS[int(rng.integers(2))], FIELD_KINDS[int(rng.integers(len(FIELD_KINDS)))]) for _ in range(2)]
    seeds = rng.integers(0, 2 ** 31, blocks.nranks)

    def work(transport):
        local = np.random.default_rng(seeds[transport.rank])
        initial = []
        for centering, kind in kinds:
            field = allocate_field(blocks, transport.rank, centering, **kind)
            field.interior[...] = local.uniform(-1., 1., field.interior.shape)
            initial.append(field.data.copy())
        exchanged = []
        for mode in ('nonblocking', 'blocking'):
            exchanger = Exchanger(build_topology(blocks, transport.rank), transport, mode=mode)
            fields = [allocate_field(blocks, transport.rank, centering, **kind) for centering, kind in kinds]
            for field, data in zip(fields, initial):
                field.data[...] = data
            exchanger.exchange(fields)
            exchanged.append([field.data for field in fields])
        return all(np.array_equal(a, b) for a, b in zip(*exchanged))

    assert all(run_ranks(blocks.nranks, work))


def test_material_views_cannot_overlap_their_field(layout, single_exchanger):

    blocks = layout((4, 4, 1))
    exchanger = single_exchanger(blocks)
    field = allocate_field(blocks, 0, material_count=2, name='fraction')
    handle = exchanger.start(field.select(0))
    with pytest.raises(ContractError):
        exchanger.start(field)
    with pytest.raises(ContractError):
        exchanger.start(field.select(0))
    other = exchanger.start(field.select(1))
    for h in (handle, other):
        exchange_finish(h)
    exchange_finish(exchanger.start(field))


def test_failed_wait_releases_the_field(layout):

    blocks = layout((6, 1, 1), (2, 1, 1))
    hub = InProcessHub(2, timeout=5.)
    exchanger = Exchanger(build_topology(blocks, 0), hub.endpoints[0])
    field = allocate_field(blocks, 0)
    handle = exchanger.start(field)
    hub.abort()
    with pytest.raises(TransportError):
        exchange_finish(handle)
    assert not handle.is_open and not field.is_open


def test_interleaved_fields(layout, run_ranks):

    blocks = layout((6, 1, 1), (2, 1, 1))

    def work(transport):
        exchanger = Exchanger(build_topology(blocks, transport.rank), transport)
        a, b = allocate_field(blocks, transport.rank, name='a'), allocate_field(blocks, transport.rank, name='b')
        a.interior[...] = 1. + transport.rank
        b.interior[...] = -1. - transport.rank
        handles = [exchanger.start(a), exchanger.start(b)]
        for handle in reversed(handles):
            exchange_finish(handle)
        return a.data[:, 0, 0].copy(), b.data[:, 0, 0].copy()

    (a0, b0), (a1, b1) = run_ranks(2, work)
    assert a0[-1] == 2. and b0[-1] == -2.
    assert a1[0] == 1. and b1[0] == -1.


def test_exchange_sends_a_snapshot(layout, run_ranks):

    blocks = layout((6, 1, 1), (2, 1, 1))

    def work(transport):
        exchanger = Exchanger(build_topology(blocks, transport.rank), transport)
        field = allocate_field(blocks, transport.rank)
        field.interior[...] = 5.
        handle = exchanger.start(field)
        field.interior[...] = 9.
        exchange_finish(handle)
        return field.data[:, 0, 0].copy()

    left, right = run_ranks(2, work)
    assert left[-1] == 5. and right[0] == 5.


def test_handle_contracts(layout, single_exchanger):

    blocks = layout((4, 1, 1))
    exchanger = single_exchanger(blocks)
    field = allocate_field(blocks, 0)
    handle = exchanger.start(field)
    with pytest.raises(ContractError):
        exchanger.start(field)
    exchange_finish(handle)
    assert not handle.is_open and not field.is_open
    with pytest.raises(ContractError):
        exchange_finish(handle)


def test_schedule_must_match_the_field(layout, single_exchanger):

    blocks = layout((4, 1, 1))
    exchanger = single_exchanger(blocks)
    vertex = allocate_field(blocks, 0, 'vertex')
    with pytest.raises(ContractError):
        exchange_blocking(vertex, exchanger.schedules['cell'], exchanger.transport)
    with pytest.raises(ContractError):
        exchange_start(allocate_field(layout((6, 1, 1)), 0), exchanger.schedules['cell'], exchanger.transport)


def test_delay_injection_slows_but_does_not_change_the_exchange(layout, run_ranks):

    blocks = layout((6, 1, 1), (2, 1, 1))

    def work(transport):
        field = allocate_field(blocks, transport.rank)
        field.interior[...] = 1. + transport.rank
        start = perf_counter()
        Exchanger(build_topology(blocks, transport.rank), transport).blocking(field)
        return field.data[:, 0, 0].copy(), perf_counter() - start

    fast = run_ranks(2, work)
    slow = run_ranks(2, work, delay_ms=50.)
    for (a, _), (b, elapsed) in zip(fast, slow):
        np.testing.assert_array_equal(a, b)
        assert elapsed >= 0.045


def test_exchange_mode_is_validated(layout):

    blocks = layout((4, 1, 1))
    with pytest.raises(ContractError):
        Exchanger(build_topology(blocks, 0), None, mode='eager')


def test_global_minimum_is_one_call(layout, run_ranks):

    blocks = layout((4, 1, 1), (2, 1, 1))

    def work(transport):
        exchanger = Exchanger(build_topology(blocks, transport.rank), transport)
        return exchanger.allreduce_min((0.2, 0.1)[transport.rank]), exchanger.counters.calls

    assert run_ranks(2, work) == [(0.1, 1), (0.1, 1)]
