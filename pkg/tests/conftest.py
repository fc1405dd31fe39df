from concurrent.futures import ThreadPoolExecutor
import numpy as np
import pytest

from SALE.kernel.grid import GlobalGrid, decompose_domain
from SALE.kernel.topology import build_topology
from SALE.kernel.transport import InProcessHub
from SALE.kernel.exchange import Exchanger
from SALE.app.state import BoundarySpec
from SALE.app.problems import init_sod


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def layout():
    """
    Layout factory: cells and ranks per axis, optional domain extent.
    """

    def make(cells, ranks=(1, 1, 1), extent=(1., 1., 1.)):
        return decompose_domain(GlobalGrid(cells_per_axis=cells, domain_extent=extent), ranks)

    return make


@pytest.fixture
def run_ranks():
    """
    Run work(transport) on every rank of an in-process group, one thread per rank, and return the results in rank
    order.
    """

    def run(size, work, delay_ms=0.):
        hub = InProcessHub(size, delay_ms=delay_ms, timeout=30.)
        with ThreadPoolExecutor(max_workers=size) as pool:
            futures = [pool.submit(work, transport) for transport in hub.endpoints]
        return [f.result() for f in futures]

    return run


@pytest.fixture
def single_exchanger():

    def make(layout):
        return Exchanger(build_topology(layout, 0), InProcessHub(1).endpoints[0])

    return make


@pytest.fixture
def uniform_state(layout):
    """
    Quiescent single-rank gas at uniform density and pressure, optionally with other boundary conditions.
    """

    def make(cells, rho=1., p=1., extent=(1., 1., 1.), boundary=None, options=None):
        state = init_sod(layout(cells, extent=extent), 0, left=(rho, p), right=(rho, p), options=options)
        if boundary is not None:
            state.boundary = BoundarySpec.uniform(boundary)
        return state

    return make
