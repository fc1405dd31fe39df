from SALE.bench.config import RunConfig, parse_config
from SALE.bench.harness import RunReport, run_simulation, run_scaling_suite, emit_report
from SALE.bench.storage import RecordDatabase
