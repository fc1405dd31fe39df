import numpy as np
import pytest

from SALE.kernel.field import Field, allocate_field, interior_view
from SALE.kernel.errors import ContractError


@pytest.fixture
def cube(layout):
    return layout((4, 4, 4))


def test_storage_shapes(cube):

    assert allocate_field(cube, 0, 'cell').data.shape == (6, 6, 6)
    assert allocate_field(cube, 0, 'vertex').data.shape == (7, 7, 7)
    assert allocate_field(cube, 0, 'cell', material_count=3).data.shape == (3, 6, 6, 6)
    assert allocate_field(cube, 0, 'vertex', components=3).data.shape == (3, 7, 7, 7)


def test_inert_axes_carry_no_ghost(layout):

    field = allocate_field(layout((8, 1, 1)), 0, 'vertex')
    assert field.interior_shape == (9, 1, 1)
    assert field.storage_shape == (11, 1, 1)


def test_interior_is_offset_by_the_ghost_width(cube):

    field = allocate_field(cube, 0)
    interior_view(field)[0, 0, 0] = 7.
    g = cube.ghost_width
    assert field.data[g, g, g] == 7.


def test_interior_fill_leaves_ghosts_untouched(cube):

    field = allocate_field(cube, 0)
    interior = interior_view(field)
    interior[...] = 1.
    assert interior.size == 64
    assert field.data.sum() == 64.
    assert field.data[0].max() == 0. and field.data[:, :, -1].max() == 0.


def test_select_aliases_one_material(cube):

    field = allocate_field(cube, 0, material_count=2, name='density')
    second = field.select(1)
    second.fill(3.)
    assert np.all(field.data[1] == 3.) and np.all(field.data[0] == 0.)
    assert second.storage_shape == field.storage_shape
    with pytest.raises(ContractError):
        second.select(0)


def test_exchange_guard(cube):

    field = allocate_field(cube, 0)
    field.acquire()
    assert field.is_open
    with pytest.raises(ContractError):
        field.acquire()
    field.release()
    field.acquire()


def test_material_views_share_the_exchange_guard(cube):

    field = allocate_field(cube, 0, material_count=3, name='fraction')
    field.acquire()
    assert field.select(0).is_open
    with pytest.raises(ContractError):
        field.select(0).acquire()
    field.release()

    first, second = field.select(0), field.select(1)
    first.acquire()
    second.acquire()
    assert field.is_open and not field.select(2).is_open
    with pytest.raises(ContractError):
        field.acquire()
    with pytest.raises(ContractError):
        field.select(0).acquire()
    first.release()
    second.release()
    assert not field.is_open
    field.acquire()


def test_allocation_contracts(cube):

    with pytest.raises(ContractError):
        allocate_field(cube, 0, 'face')
    with pytest.raises(ContractError):
        allocate_field(cube, 0, material_count=2, components=3)
    with pytest.raises(ContractError):
        allocate_field(cube, 1)
    with pytest.raises(ContractError):
        Field(cube, 0, data=np.zeros((5, 5, 5)))
