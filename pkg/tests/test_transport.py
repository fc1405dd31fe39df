import numpy as np
import pytest

from SALE.kernel.transport import InProcessHub, ExchangeCounters, make_transport
from SALE.kernel.errors import TransportError, ContractError, ConfigError


def test_collectives(run_ranks):

    def work(transport):
        return (transport.allgather(transport.rank * 10),
                transport.allreduce_min(3. - transport.rank),
                transport.bcast('root' if transport.rank == 0 else None),
                transport.gather(transport.rank, root=1))

    results = run_ranks(3, work)
    assert all(r[0] == [0, 10, 20] for r in results)
    assert all(r[1] == 1. for r in results)
    assert all(r[2] == 'root' for r in results)
    assert [r[3] for r in results] == [None, [0, 1, 2], None]


def test_messages_keep_their_order(run_ranks):

    def work(transport):
        if transport.rank == 0:
            for tag in range(1, 4):
                transport.isend(1, tag, np.full(2, float(tag))).wait()
            return None
        buffers = {tag: np.empty(2) for tag in (3, 1, 2)}
        for tag, buffer in buffers.items():
            transport.irecv(0, tag, buffer).wait()
        return {tag: buffer[0] for tag, buffer in buffers.items()}

    assert run_ranks(2, work)[1] == {1: 1., 2: 2., 3: 3.}


def test_receive_timeout_names_the_peer():

    hub = InProcessHub(2, timeout=0.2)
    with pytest.raises(TransportError) as error:
        hub.endpoints[0].irecv(1, 1, np.empty(1)).wait()
    assert error.value.neighbor == 1


def test_abort_releases_waiting_ranks():

    hub = InProcessHub(2)
    hub.endpoints[1].abort()
    assert hub.aborted
    with pytest.raises(TransportError):
        hub.endpoints[0].irecv(1, 1, np.empty(1)).wait()


def test_size_mismatch_is_a_contract_error():

    hub = InProcessHub(2, timeout=1.)
    hub.endpoints[1].isend(0, 1, np.zeros(3))
    with pytest.raises(ContractError):
        hub.endpoints[0].irecv(1, 1, np.empty(2)).wait()


def test_peers_are_checked():

    endpoint = InProcessHub(2).endpoints[0]
    with pytest.raises(ContractError):
        endpoint.isend(0, 1, np.zeros(1))
    with pytest.raises(ContractError):
        endpoint.irecv(2, 1, np.zeros(1))


def test_tags_increase():

    endpoint = InProcessHub(1).endpoints[0]
    assert [endpoint.next_tag() for _ in range(3)] == [1, 2, 3]


def test_counters():

    counters = ExchangeCounters()
    counters.record('edge', 16)
    counters.record('edge', 8)
    counters.calls += 2
    snapshot = counters.snapshot()
    assert snapshot['calls'] == 2 and snapshot['bytes_edge'] == 24 and snapshot['messages_edge'] == 2
    counters.reset()
    assert all(value == 0 for value in counters.snapshot().values())


def test_factory():

    assert len(make_transport('inprocess', 3)) == 3
    with pytest.raises(ConfigError):
        make_transport('carrier-pigeon', 2)
