from SALE.app.materials import Material, MaterialSet
from SALE.app.state import SimulationState, BoundarySpec, HydroOptions, allocate_state
from SALE.app.lagrange import lagrangian_cycle
from SALE.app.rezone import compute_fluxes, advect_cells, advect_momentum, eulerian_cycle
from SALE.app.problems import ProblemSpec, init_sedov, init_sod, init_noh, initialize
