from typing import Dict, List, Sequence
import numpy as np

from SALE.kernel.field import Field
from SALE.kernel.topology import CommSchedule, NeighborTopology, build_schedule
from SALE.kernel.transport import Transport, Request
from SALE.kernel.errors import ContractError

EXCHANGE_MODES = ('nonblocking', 'blocking')


class ExchangeHandle:

    def __init__(self,
                 field: Field,
                 schedule: CommSchedule,
                 transport: Transport,
                 requests: List[Request],
                 buffers: Dict[int, np.ndarray]):
        """
        In-flight non-blocking exchange of a field. Must be finished exactly once.
        """

        self.field = field
        self.schedule = schedule
        self.transport = transport
        self.__requests = requests
        self.__buffers = buffers
        self.__open = True

    @property
    def is_open(self) -> bool:
        return self.__open

    def complete(self) -> None:

        if not self.__open:
            raise ContractError(f"The exchange of field '{self.field.name}' was already finished.")
        try:
            for request in self.__requests:
                request.wait()
            for message in self.schedule.messages:
                self.field.data[(Ellipsis,) + message.recv] = self.__buffers[message.neighbor.rank]
        finally:
            self.__open = False
            self.field.release()
        self.transport.counters.calls += 1


def _check_schedule(field: Field, schedule: CommSchedule) -> None:

    if field.centering != schedule.centering:
        raise ContractError(f"A {schedule.centering} schedule cannot exchange the {field.centering} field "
                            f"'{field.name}'.")
    if field.storage_shape != schedule.storage_shape or field.rank != schedule.topology.rank:
        raise ContractError(f"Field '{field.name}' of storage {field.storage_shape} on rank {field.rank} does not "
                            f"match the schedule built for {schedule.storage_shape} on rank {schedule.topology.rank}.")


def exchange_start(field: Field, schedule: CommSchedule, transport: Transport) -> ExchangeHandle:
    """
    Snapshot the boundary strips of the field and post the neighbor messages.

    :param field: Field whose ghosts are refreshed.
    :param schedule: Send / receive regions of the field.
    :param transport: Transport of the rank.
    """

    _check_schedule(field, schedule)
    field.acquire()
    tag = transport.next_tag()
    sends, buffers = {}, {}
    for message in schedule.messages:
        payload = np.array(field.data[(Ellipsis,) + message.send], copy=True)
        shape = field.leading_shape + tuple(s.stop - s.start for s in message.recv)
        sends[message.neighbor.rank] = payload
        buffers[message.neighbor.rank] = np.empty(shape)
        transport.counters.record(message.neighbor.kind, payload.nbytes)
    requests = transport.neighbor_alltoall(sends, buffers, tag)
    return ExchangeHandle(field, schedule, transport, requests, buffers)


def exchange_finish(handle: ExchangeHandle) -> None:
    """
    Wait for the messages of an exchange and write them into the ghost region.
    """

    handle.complete()


def exchange_blocking(field: Field, schedule: CommSchedule, transport: Transport) -> None:
    """
    Refresh the ghost region of a field from the interior of its neighbors.
    """

    exchange_finish(exchange_start(field, schedule, transport))


class Exchanger:

    def __init__(self, topology: NeighborTopology, transport: Transport, mode: str = 'nonblocking'):
        """
        Rank-local helper binding a topology, its cell and vertex schedules and a transport.

        :param topology: Neighbor graph of the rank.
        :param transport: Transport of the rank.
        :param mode: 'nonblocking' overlaps the exchanges of a group of fields, 'blocking' runs them in turn.
        """

        if mode not in EXCHANGE_MODES:
            raise ContractError(f"Unknown exchange mode '{mode}', must be in {EXCHANGE_MODES}.")
        self.topology = topology
        self.transport = transport
        self.mode = mode
        self.schedules = {centering: build_schedule(topology, centering) for centering in ('cell', 'vertex')}
        transport.attach_topology(topology)

    @property
    def counters(self):
        return self.transport.counters

    def blocking(self, field: Field) -> None:
        exchange_blocking(field, self.schedules[field.centering], self.transport)

    def start(self, field: Field) -> ExchangeHandle:
        return exchange_start(field, self.schedules[field.centering], self.transport)

    def exchange(self, fields: Sequence[Field]) -> None:
        """
        Exchange a group of fields. Material fields are exchanged one material at a time.
        """

        singles = []
        for field in fields:
            if field.material_count is not None:
                singles += [field.select(m) for m in range(field.material_count)]
            else:
                singles.append(field)
        if self.mode == 'blocking':
            for field in singles:
                self.blocking(field)
        else:
            for handle in [self.start(field) for field in singles]:
                exchange_finish(handle)

    def allreduce_min(self, value: float) -> float:
        """
        Global minimum across ranks, accounted as one exchange call.
        """

        result = self.transport.allreduce_min(value)
        self.transport.counters.calls += 1
        return result
