from typing import Any, Dict, Hashable, List, Optional, Tuple
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from queue import Queue, Empty
from threading import Event
from time import perf_counter, sleep
from logging import getLogger
import numpy as np

from SALE.kernel.errors import TransportError, ContractError, ConfigError

logger = getLogger('SALE.kernel')

TRANSPORTS = ('inprocess', 'multiprocess')
MPI_TAG_RANGE = 32768


@dataclass
class ExchangeCounters:
    """
    Exchange accounting of a rank: completed exchange rounds and the bytes / messages sent per neighbor class.
    """

    calls: int = 0
    bytes: Dict[str, int] = field(default_factory=lambda: {'face': 0, 'edge': 0, 'corner': 0})
    messages: Dict[str, int] = field(default_factory=lambda: {'face': 0, 'edge': 0, 'corner': 0})

    def record(self, kind: str, nbytes: int) -> None:
        self.bytes[kind] += nbytes
        self.messages[kind] += 1

    def snapshot(self) -> Dict[str, int]:
        snap = {'calls': self.calls}
        snap.update({f'bytes_{k}': v for k, v in self.bytes.items()})
        snap.update({f'messages_{k}': v for k, v in self.messages.items()})
        return snap

    def reset(self) -> None:
        self.calls = 0
        for k in self.bytes:
            self.bytes[k] = 0
            self.messages[k] = 0


class Request(ABC):

    @abstractmethod
    def wait(self) -> None:
        pass


class CompletedRequest(Request):

    def wait(self) -> None:
        pass


class Transport(ABC):
    """
    Ordered, reliable point-to-point delivery between the rank-workers of a group, plus the few collectives the
    harness needs. Messages between a fixed (sender, receiver) pair are delivered in send order, exactly once.
    """

    def __init__(self, rank: int, size: int):

        self.__rank = rank
        self.__size = size
        self.__tag = 0
        self.counters = ExchangeCounters()
        self.weights: Dict[int, int] = {}

    @property
    def rank(self) -> int:
        return self.__rank

    @property
    def size(self) -> int:
        return self.__size

    def next_tag(self) -> int:
        """
        Sequence number of the next exchange. Every rank performs the same sequence of exchanges.
        """

        self.__tag += 1
        return self.__tag

    def check_peer(self, peer: int) -> None:
        if not 0 <= peer < self.__size or peer == self.__rank:
            raise ContractError(f"Rank {self.__rank} cannot communicate with rank {peer}.")

    def attach_topology(self, topology) -> None:
        """
        Hand the neighbor graph and its weights to the transport, which may use them for placement.

        :param topology: NeighborTopology of this rank.
        """

        self.weights = dict(zip(topology.ranks, topology.weights))

    @abstractmethod
    def isend(self, dest: int, tag: int, buffer: np.ndarray) -> Request:
        pass

    @abstractmethod
    def irecv(self, source: int, tag: int, buffer: np.ndarray) -> Request:
        pass

    def neighbor_alltoall(self,
                          sends: Dict[int, np.ndarray],
                          recvs: Dict[int, np.ndarray],
                          tag: int) -> List[Request]:
        """
        Post all the sends and receives of a neighborhood exchange. Receive buffers are filled on wait().

        :param sends: Payload per destination rank.
        :param recvs: Destination buffer per source rank.
        :param tag: Exchange sequence number.
        """

        requests = [self.irecv(source, tag, buffer) for source, buffer in recvs.items()]
        requests += [self.isend(dest, tag, buffer) for dest, buffer in sends.items()]
        return requests

    @abstractmethod
    def allgather(self, value: Any) -> List[Any]:
        pass

    def gather(self, value: Any, root: int = 0) -> Optional[List[Any]]:
        values = self.allgather(value)
        return values if self.rank == root else None

    def bcast(self, value: Any, root: int = 0) -> Any:
        return self.allgather(value if self.rank == root else None)[root]

    def barrier(self) -> None:
        self.allgather(None)

    def allreduce_min(self, value: float) -> float:
        """
        Global minimum, reduced in rank order so that every rank gets the same bits.
        """

        values = self.allgather(float(value))
        result = values[0]
        for v in values[1:]:
            result = min(result, v)
        return result

    def abort(self, reason: str = '') -> None:
        pass


class InProcessHub:

    def __init__(self, size: int, delay_ms: float = 0., timeout: Optional[float] = None):
        """
        Shared message board of a group of rank-workers living in one process (one thread per rank).

        :param size: Number of ranks.
        :param delay_ms: Delivery delay added to every message (test hook).
        :param timeout: Seconds a receive may wait before failing. Waits forever when None.
        """

        self.size = size
        self.delay = delay_ms / 1000.
        self.timeout = timeout
        self.__queues: Dict[Tuple[int, int], Queue] = {(s, d): Queue()
                                                       for s in range(size) for d in range(size) if s != d}
        self.__abort = Event()
        self.endpoints = [InProcessTransport(self, rank) for rank in range(size)]

    def queue(self, source: int, dest: int) -> Queue:
        return self.__queues[(source, dest)]

    @property
    def aborted(self) -> bool:
        return self.__abort.is_set()

    def abort(self) -> None:
        self.__abort.set()


class _PendingReceive(Request):

    def __init__(self, transport: 'InProcessTransport', source: int, tag: Hashable, buffer: np.ndarray):
        self.__transport = transport
        self.__source = source
        self.__tag = tag
        self.__buffer = buffer

    def wait(self) -> None:
        payload = self.__transport.receive(self.__source, self.__tag)
        if payload.size != self.__buffer.size:
            raise ContractError(f"Received {payload.size} elements from rank {self.__source}, "
                                f"expected {self.__buffer.size}.")
        self.__buffer[...] = payload.reshape(self.__buffer.shape)


class InProcessTransport(Transport):

    def __init__(self, hub: InProcessHub, rank: int):
        super().__init__(rank, hub.size)
        self.__hub = hub
        self.__stash: Dict[Tuple[int, Hashable], List[Tuple[float, Any]]] = {}
        self.__collective = 0

    def post(self, dest: int, tag: Hashable, payload: Any) -> None:
        self.__hub.queue(self.rank, dest).put((tag, perf_counter() + self.__hub.delay, payload))

    def receive(self, source: int, tag: Hashable) -> Any:
        """
        Blocking receive of the message of a given tag from a given source. Messages of other tags are stashed.
        """

        box = self.__stash.get((source, tag))
        if box:
            ready_at, payload = box.pop(0)
        else:
            queue, started = self.__hub.queue(source, self.rank), perf_counter()
            while True:
                if self.__hub.aborted:
                    raise TransportError(source, "the rank group was aborted")
                if self.__hub.timeout is not None and perf_counter() - started > self.__hub.timeout:
                    raise TransportError(source, f"no message with tag {tag} after {self.__hub.timeout} s")
                try:
                    msg_tag, ready_at, payload = queue.get(timeout=0.05)
                except Empty:
                    continue
                if msg_tag == tag:
                    break
                self.__stash.setdefault((source, msg_tag), []).append((ready_at, payload))
        if (wait := ready_at - perf_counter()) > 0:
            sleep(wait)
        return payload

    def isend(self, dest: int, tag: int, buffer: np.ndarray) -> Request:
        self.check_peer(dest)
        self.post(dest, tag, np.array(buffer, copy=True))
        return CompletedRequest()

    def irecv(self, source: int, tag: int, buffer: np.ndarray) -> Request:
        self.check_peer(source)
        return _PendingReceive(self, source, tag, buffer)

    def allgather(self, value: Any) -> List[Any]:
        self.__collective += 1
        tag = ('collective', self.__collective)
        for dest in range(self.size):
            if dest != self.rank:
                self.post(dest, tag, value)
        return [value if source == self.rank else self.receive(source, tag) for source in range(self.size)]

    def abort(self, reason: str = '') -> None:
        if reason:
            logger.error(f"Rank {self.rank} aborts the rank group: {reason}")
        self.__hub.abort()


class _MPIRequest(Request):

    def __init__(self, request):
        self.__request = request

    def wait(self) -> None:
        self.__request.Wait()


class MPITransport(Transport):

    def __init__(self, comm=None):
        """
        One OS process per rank over MPI. Requires mpi4py and a launch through mpiexec.

        :param comm: MPI communicator, COMM_WORLD by default.
        """

        try:
            from mpi4py import MPI
        except ImportError as error:
            raise ConfigError('backend', "The 'multiprocess' backend requires mpi4py ('pip install mpi4py').") \
                from error
        self.__MPI = MPI
        self.comm = MPI.COMM_WORLD if comm is None else comm
        self.graph = None
        super().__init__(self.comm.Get_rank(), self.comm.Get_size())

    def attach_topology(self, topology) -> None:
        super().attach_topology(topology)
        self.graph = self.comm.Create_dist_graph_adjacent(sources=topology.ranks,
                                                          destinations=topology.ranks,
                                                          sourceweights=topology.weights,
                                                          destweights=topology.weights,
                                                          reorder=False)

    def isend(self, dest: int, tag: int, buffer: np.ndarray) -> Request:
        self.check_peer(dest)
        return _MPIRequest(self.comm.Isend(np.ascontiguousarray(buffer), dest=dest, tag=tag % MPI_TAG_RANGE))

    def irecv(self, source: int, tag: int, buffer: np.ndarray) -> Request:
        self.check_peer(source)
        return _MPIRequest(self.comm.Irecv(buffer, source=source, tag=tag % MPI_TAG_RANGE))

    def allgather(self, value: Any) -> List[Any]:
        return self.comm.allgather(value)

    def gather(self, value: Any, root: int = 0) -> Optional[List[Any]]:
        return self.comm.gather(value, root=root)

    def bcast(self, value: Any, root: int = 0) -> Any:
        return self.comm.bcast(value, root=root)

    def barrier(self) -> None:
        self.comm.Barrier()

    def abort(self, reason: str = '') -> None:
        if reason:
            logger.error(f"Rank {self.rank} aborts MPI: {reason}")
        self.comm.Abort(1)


def make_transport(name: str, size: int, delay_ms: float = 0., timeout: Optional[float] = None) -> List[Transport]:
    """
    Create the transport endpoints handled by this process.

    :param name: 'inprocess' (all ranks as threads of this process) or 'multiprocess' (this MPI process only).
    :param size: Expected number of ranks.
    :param delay_ms: Per-message delivery delay of the in-process transport.
    :param timeout: Receive timeout of the in-process transport.
    """

    if name == 'inprocess':
        return InProcessHub(size, delay_ms=delay_ms, timeout=timeout).endpoints
    if name == 'multiprocess':
        transport = MPITransport()
        if transport.size != size:
            raise ConfigError('ranks', f"The layout needs {size} ranks but MPI was launched with {transport.size} "
                                       f"processes.")
        return [transport]
    raise ConfigError('backend', f"Unknown backend '{name}', must be in {TRANSPORTS}.")
