from SALE.kernel.grid import GlobalGrid, BlockLayout, decompose_domain
from SALE.kernel.field import Field, allocate_field, interior_view
from SALE.kernel.geometry import cell_geometry
from SALE.kernel.topology import NeighborTopology, CommSchedule, build_topology, build_schedule
from SALE.kernel.transport import Transport, InProcessHub, InProcessTransport, MPITransport, make_transport
from SALE.kernel.exchange import ExchangeHandle, Exchanger, exchange_blocking, exchange_start, exchange_finish
