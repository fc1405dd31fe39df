import numpy as np
import pytest

from SALE.kernel.topology import build_topology
from SALE.kernel.exchange import Exchanger
from SALE.kernel.errors import ConfigError
from SALE.app.problems import (ProblemSpec, BACKGROUND_ENERGY, DEFAULT_END_TIMES, default_boundary, init_sod,
                               init_sedov, init_noh, initialize)
from SALE.bench.oracles import conservation_audit


def test_sod_states(layout):

    state = init_sod(layout((10, 1, 1)), 0)
    rho = state.density.interior[0, :, 0, 0]
    e = state.energy.interior[0, :, 0, 0]
    np.testing.assert_array_equal(rho, [1.] * 5 + [0.125] * 5)
    np.testing.assert_allclose(e, [2.5] * 5 + [2.] * 5, rtol=1e-14)
    np.testing.assert_allclose(state.pressure.interior[:, 0, 0], [1.] * 5 + [0.1] * 5, rtol=1e-14)
    assert np.all(state.u.data == 0.)
    assert state.dt_prev == state.dt > 0.
    assert state.t_end == DEFAULT_END_TIMES['sod']


def test_two_material_sod(layout):

    state = init_sod(layout((10, 1, 1)), 0, gamma=(1.4, 5. / 3.))
    assert state.materials.count == 2
    f = state.fraction.interior[:, :, 0, 0]
    np.testing.assert_array_equal(f[0], [1.] * 5 + [0.] * 5)
    np.testing.assert_array_equal(f[1], [0.] * 5 + [1.] * 5)
    assert state.energy.interior[1, -1, 0, 0] == pytest.approx(0.1 / ((5. / 3. - 1.) * 0.125))
    np.testing.assert_allclose(state.pressure.interior[:, 0, 0], [1.] * 5 + [0.1] * 5, rtol=1e-14)


def test_sod_ghosts_are_filled(layout, run_ranks):

    blocks = layout((8, 1, 1), (2, 1, 1))

    def work(transport):
        exchanger = Exchanger(build_topology(blocks, transport.rank), transport)
        state = init_sod(blocks, transport.rank, exchanger=exchanger)
        return state.density.data[0, :, 0, 0].copy()

    left, right = run_ranks(2, work)
    assert left[-1] == 0.125 and right[0] == 1.


@pytest.mark.parametrize('cells', [(4, 4, 4), (8, 8, 8), (8, 8, 1)])
def test_sedov_energy(layout, cells):

    state = init_sedov(layout(cells), 0, E0=0.125)
    totals = conservation_audit(state)
    assert totals.internal_energy == pytest.approx(0.125 * (1. + BACKGROUND_ENERGY), rel=1e-12)
    assert totals.kinetic_energy == 0.
    assert totals.total_mass == pytest.approx(1., rel=1e-14)
    assert np.all(state.density.interior == 1.)
    hottest = np.unravel_index(np.argmax(state.energy.interior[0]), state.volume.interior_shape)
    assert hottest == (0, 0, 0)


def test_sedov_energy_on_many_ranks(layout, run_ranks):

    blocks = layout((4, 4, 4), (2, 2, 2))

    def work(transport):
        exchanger = Exchanger(build_topology(blocks, transport.rank), transport)
        state = init_sedov(blocks, transport.rank, exchanger=exchanger)
        return conservation_audit(state, transport).internal_energy

    serial = conservation_audit(init_sedov(layout((4, 4, 4)), 0)).internal_energy
    assert run_ranks(8, work) == [serial] * 8


def test_sedov_needs_two_dimensions(layout):
    with pytest.raises(ConfigError):
        init_sedov(layout((16, 1, 1)), 0)


def test_planar_noh(layout):

    state = init_noh(layout((8, 1, 1)), 0)
    assert np.all(state.u.interior[0] == -1.)
    assert np.all(state.u.interior[1:] == 0.)
    totals = conservation_audit(state)
    assert totals.kinetic_energy == pytest.approx(0.5 * totals.total_mass, rel=1e-12)
    assert totals.momentum[0] == pytest.approx(-1., rel=1e-12)
    np.testing.assert_allclose(state.pressure.interior, 1e-6, rtol=1e-12)


def test_radial_noh(layout):

    state = init_noh(layout((4, 4, 1)), 0)
    u = state.u.interior
    speed = np.sqrt((u ** 2).sum(axis=0))
    assert speed[0, 0, 0] == 0.
    speed[0, 0, 0] = 1.
    np.testing.assert_allclose(speed, 1., rtol=1e-14)
    x = state.x.interior
    np.testing.assert_allclose(u[0] * x[1], u[1] * x[0], atol=1e-15)


def test_default_boundaries():

    sod, blast = default_boundary('sod'), default_boundary('sedov')
    assert all(sod[(axis, side)] == 'slip_wall' for axis in range(3) for side in (0, 1))
    assert blast[(0, 0)] == 'slip_wall' and blast[(2, 1)] == 'free_surface'


def test_problem_validation():

    assert ProblemSpec('noh').t_end == DEFAULT_END_TIMES['noh']
    for arguments in [dict(kind='kelvin-helmholtz'), dict(kind='sedov', gammas=(1.4, 1.4)),
                      dict(kind='sod', gammas=(1.4, 1.4, 1.4)), dict(kind='sod', split=1.),
                      dict(kind='sod', left=(0., 1.)), dict(kind='noh', t_end=0.), dict(kind='sedov', energy=-1.)]:
        with pytest.raises(ConfigError):
            ProblemSpec(**arguments)


def test_initialize_dispatches(layout):

    sod = initialize(ProblemSpec('sod', gammas=(1.4, 1.4)), layout((6, 1, 1)), 0)
    assert sod.materials.count == 2
    noh = initialize(ProblemSpec('noh', gammas=(5. / 3.,), inflow_speed=2.), layout((6, 1, 1)), 0)
    assert np.all(noh.u.interior[0] == -2.)
    assert noh.t_end == 0.6
    blast = initialize(ProblemSpec('sedov', energy=1., strength=True), layout((4, 4, 1)), 0)
    assert blast.materials.has_strength
    assert conservation_audit(blast).internal_energy == pytest.approx(1., rel=1e-9)
