import numpy as np
import pytest

import SALE.cli
from SALE.cli import execute_cli, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VERIFICATION
from SALE.kernel.errors import TangledMeshError, VerificationError
from SALE.bench.storage import RecordDatabase


def test_run_writes_the_report(tmp_path, capsys):

    out = tmp_path / 'cycles.csv'
    database = tmp_path / 'run.db'
    assert execute_cli(['run', '--problem', 'sod', '--cells', '16,1,1', '--cycles', '3', '--out', str(out),
                        '--database', str(database)]) == 0
    assert len(out.read_text().splitlines()) == 4
    printed = capsys.readouterr().out
    assert 'StoringTable "Cycles"' in printed and 'ExchangeTable "Summary"' in printed
    records = RecordDatabase(str(tmp_path), 'run').load()
    assert records.nb_lines('Cycles') == 3
    assert records.get_line('Summary')['problem'] == 'sod'
    records.close()


def test_configuration_errors(tmp_path):

    path = tmp_path / 'run.cfg'
    path.write_text("colour = blue\n")
    assert execute_cli(['run', '--config', str(path)]) == EXIT_CONFIG
    assert execute_cli(['run', '--cells', '4,4,4', '--ranks', '3,3,3']) == EXIT_CONFIG
    assert execute_cli(['run', '--cycles', 'twenty']) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        execute_cli(['run', '--problem', 'blast'])


def test_numerical_failure_exit_code(monkeypatch):

    def tangle(config):
        raise TangledMeshError((3, 0, 0), -1e-3)

    monkeypatch.setattr(SALE.cli, 'run_simulation', tangle)
    assert execute_cli(['run', '--cells', '16,1,1', '--cycles', '1']) == EXIT_NUMERICAL


def test_verification_failure_exit_code(monkeypatch):

    def fail(config):
        raise VerificationError("1 verification(s) failed: noh_plateau", metrics={'noh_plateau': (0.2, 0.05)})

    monkeypatch.setattr(SALE.cli, 'run_simulation', fail)
    assert execute_cli(['run', '--cells', '16,1,1', '--cycles', '1']) == EXIT_VERIFICATION


def test_scale_command(tmp_path, capsys):

    out = tmp_path / 'strong.csv'
    assert execute_cli(['scale', '--mode', 'strong', '--ranks-list', '1,2', '--cells', '16,1,1', '--cycles', '2',
                        '--out', str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert 'STRONG SCALING' in capsys.readouterr().out
    assert execute_cli(['scale', '--mode', 'weak', '--ranks-list', '2,4', '--cells', '16,1,1']) == EXIT_CONFIG


@pytest.mark.parametrize('oracle', ['riemann', 'sedov', 'noh'])
def test_oracle_profiles(tmp_path, capsys, oracle):

    database = tmp_path / 'golden.db'
    arguments = ['oracle', oracle, '--points', '11', '--database', str(database)]
    assert execute_cli(arguments) == 0
    assert 'StoringTable "Golden"' in capsys.readouterr().out
    assert execute_cli(arguments + ['--json', str(tmp_path / 'golden.json')]) == 0
    records = RecordDatabase(str(tmp_path), 'golden').load()
    assert records.nb_lines('Golden') == 2
    line = records.get_line('Golden')
    assert line['oracle'] == oracle and line['density'].shape == (11,)
    assert np.all(np.isfinite(line['density']))
    records.close()
    assert (tmp_path / 'golden.json').exists()
