from os.path import exists, join
import numpy as np
import pytest

from SALE.bench.storage import RecordDatabase


@pytest.fixture
def database(tmp_path):
    database = RecordDatabase(database_dir=str(tmp_path), database_name='records').new()
    yield database
    database.close()


def test_tables_are_created_from_the_data(database):

    assert database.add_data('cycles', {'cycle': 1, 'wall_ms': 2.5, 'verified': True}) == 1
    assert database.add_data('Cycles', {'cycle': 2, 'wall_ms': np.float64(3.)}) == 2
    assert database.get_tables() == ['Cycles']
    assert {'cycle', 'wall_ms', 'verified'} <= set(database.get_fields('Cycles'))
    lines = database.get_lines('Cycles', fields=['cycle', 'wall_ms'])
    assert lines == {'cycle': [1, 2], 'wall_ms': [2.5, 3.]}
    assert database.nb_lines('Cycles') == 2
    assert database.get_line('Cycles')['cycle'] == 2


def test_exchange_table_keeps_the_latest_line(database):

    database.create_table('Summary', storing_table=False)
    database.add_data('Summary', {'status': 'first', 'cycles': 10})
    database.add_data('Summary', {'status': 'second', 'cycles': 20})
    assert database.nb_lines('Summary') == 1
    line = database.get_line('Summary')
    assert line['status'] == 'second' and line['cycles'] == 20
    assert line['_dt_'] is not None


def test_batches(database):

    ids = database.add_batch('Cycles', {'cycle': [1, 2, 3], 'dt': [1e-3, 1.1e-3, 1.21e-3]})
    assert ids == [1, 2, 3]
    assert database.get_lines('Cycles', fields=['dt'])['dt'] == [1e-3, 1.1e-3, 1.21e-3]
    with pytest.raises(ValueError):
        database.add_batch('Cycles', {'cycle': [4, 5], 'dt': [1.]})


def test_new_fields_need_an_empty_table(database):

    database.add_data('Cycles', {'cycle': 1})
    with pytest.raises(ValueError):
        database.add_data('Cycles', {'cycle': 2, 'extra': 1.})
    with pytest.raises(ValueError):
        database.create_fields('Cycles', ('save', int))


def test_csv_export_keeps_the_column_order(database, tmp_path):

    database.add_batch('Cycles', {'t': [0.1, 0.2], 'cycle': [1, 2]})
    path = join(str(tmp_path), 'cycles.csv')
    database.export_csv('Cycles', path, fields=('cycle', 't'))
    with open(path) as file:
        assert file.read().splitlines() == ['cycle,t', '1,0.1', '2,0.2']
    database.export_csv('Cycles', path, fields=('t',), header=('time',))
    with open(path) as file:
        assert file.read().splitlines()[0] == 'time'


def test_post_save_signal(database):

    saved = []
    database.create_table('Cycles', fields=[('cycle', int)])
    database.register_post_save_signal('Cycles', lambda table, data: saved.append((table, data['cycle'])))
    database.connect_signals()
    database.add_data('Cycles', {'cycle': 7})
    assert saved == [('cycles', 7)]


def test_reload_with_arrays(tmp_path, capsys):

    profile = np.linspace(0., 1., 11)
    database = RecordDatabase(str(tmp_path), 'golden').new()
    database.add_data('Golden', {'oracle': 'noh', 'density': profile})
    database.create_table('Summary', storing_table=False)
    database.add_data('Summary', {'cycles': 3})
    database.close()

    loaded = RecordDatabase(str(tmp_path), 'golden.db').load(show_architecture=True)
    assert sorted(loaded.get_tables()) == ['Golden', 'Summary']
    printed = capsys.readouterr().out
    assert 'StoringTable "Golden"' in printed and 'ExchangeTable "Summary"' in printed
    assert '- density (' in printed
    np.testing.assert_array_equal(loaded.get_line('Golden')['density'], profile)
    loaded.add_data('Summary', {'cycles': 4})
    assert loaded.nb_lines('Summary') == 1
    loaded.close(erase_file=True)
    assert not exists(loaded.path)


def test_existing_files_are_indexed(tmp_path):

    first = RecordDatabase(str(tmp_path), 'runs').new()
    first.add_data('Runs', {'ranks': 1})
    second = RecordDatabase(str(tmp_path), 'runs').new()
    assert first.path != second.path and second.path.endswith('runs(1).db')
    third = RecordDatabase(str(tmp_path), 'runs').new(remove_existing=True)
    assert third.path == first.path
    for database in (first, second, third):
        database.close()
    with pytest.raises(ValueError):
        RecordDatabase(str(tmp_path), 'missing').load()
