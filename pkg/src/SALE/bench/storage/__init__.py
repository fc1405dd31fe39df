from SALE.bench.storage.database import RecordDatabase
from SALE.bench.storage.exporter import Exporter
from SALE.bench.storage.numpy_field import NumpyField
