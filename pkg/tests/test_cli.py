import json
import math

import pytest

import main
from core.errors import ConvergenceError
from database.schema import DatabaseSchema
from services.export import read_csv
from services.run_log import RunLog


def run_cli(cli_config, out, *argv):
    return main.main(['--config', str(cli_config), '--out', str(out), *argv])


def ledger(tmp_path):
    schema = DatabaseSchema(db_path=str(tmp_path / 'quartet.db'))
    schema.connect()
    return schema, RunLog(schema.get_connection())


class TestValidate:

    def test_four_well(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        code = run_cli(cli_config, out, 'validate', '--bp', '2', '--bq', '1', '--c', '0.5')
        assert code == main.EXIT_OK
        table = read_csv(str(out / 'critical_points.csv'))
        assert len(table['rows']) == 9
        assert [r['kind'] for r in table['rows']].count('Minimum') == 4
        report = json.loads((out / 'validate.json').read_text())
        assert report['report']['four_well'] is True

    def test_violation_exits_with_domain_code(self, cli_config, tmp_path, capsys):
        code = run_cli(cli_config, tmp_path / 'out', 'validate', '--bp', '1', '--bq', '1', '--c', '1.5')
        assert code == main.EXIT_DOMAIN
        assert 'discriminant' in capsys.readouterr().err
        report = json.loads((tmp_path / 'out' / 'validate.json').read_text())
        assert report['critical_points'] == []

    def test_ledger_records_outcome(self, cli_config, tmp_path):
        run_cli(cli_config, tmp_path / 'out', 'validate', '--bp', '2', '--bq', '1', '--c', '0.5')
        run_cli(cli_config, tmp_path / 'out', 'validate', '--c', '1.5')
        schema, log = ledger(tmp_path)
        statuses = [r['status'] for r in log.list_runs()]
        schema.close()
        assert statuses == ['domain_error', 'ok']

    def test_numerical_failure_exit_code(self, cli_config, tmp_path, monkeypatch):
        def broken(run, args):
            raise ConvergenceError('iteration cap')

        monkeypatch.setitem(main.COMMANDS, 'validate', broken)
        assert run_cli(cli_config, tmp_path / 'out', 'validate') == main.EXIT_NUMERICAL

    def test_bad_config(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{')
        assert main.main(['--config', str(path), '--out', str(tmp_path), 'validate']) == main.EXIT_DOMAIN


class TestTrajectory:

    def test_diagonal_path(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        code = run_cli(cli_config, out, 'trajectory', '--flavor', 'R', '--lam', '10', '--mu', '-0.2')
        assert code == main.EXIT_OK
        table = read_csv(str(out / 'trajectory_R.csv'))
        assert float(table['header']['action']) == pytest.approx(40.0 / 3.0 * math.sqrt(0.6), rel=1e-6)
        assert len(table['rows']) == 4001

    def test_edge_outside_window(self, cli_config, tmp_path):
        code = run_cli(cli_config, tmp_path / 'out', 'trajectory', '--flavor', 'P', '--mu', '0.3')
        assert code == main.EXIT_DOMAIN


class TestDeterminants:

    def test_pole_row(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        assert run_cli(cli_config, out, 'determinants', '--mu=-0.3,-0.1,0') == main.EXIT_OK
        rows = read_csv(str(out / 'determinants.csv'))['rows']
        assert [r['mu'] for r in rows] == [-0.3, -0.1, 0.0]
        assert rows[2]['chi_T_R'] == 'pole'
        assert rows[0]['chi_L_P'] is None
        assert not (out / 'melting_fit.json').exists()

    def test_melting_fit_near_critical(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        assert run_cli(cli_config, out, 'determinants', '--mu=-0.47:-0.1:3') == main.EXIT_OK
        fit = json.loads((out / 'melting_fit.json').read_text())
        assert fit['coefficient'] == pytest.approx(4.0 * math.log(2.0), rel=0.05)


class TestProbabilities:

    def test_trace(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        assert run_cli(cli_config, out, 'probabilities', '--lam', '10', '--mu', '-0.2') == main.EXIT_OK
        table = read_csv(str(out / 'probabilities.csv'))
        rows = table['rows']
        assert len(rows) == 201
        assert (rows[0]['P_a'], rows[0]['P_b']) == (1.0, 0.0)
        for row in rows:
            assert row['P_a'] + row['P_b'] + row['P_c'] + row['P_d'] == pytest.approx(1.0, abs=1e-12)
        assert float(table['header']['lifetime']) > 0

    def test_output_is_reproducible(self, cli_config, tmp_path):
        for name in ('one', 'two'):
            run_cli(cli_config, tmp_path / name, 'probabilities', '--lam', '8', '--mu', '0.1',
                    '--t', '0:50:11')
        assert ((tmp_path / 'one' / 'probabilities.csv').read_bytes()
                == (tmp_path / 'two' / 'probabilities.csv').read_bytes())

    def test_json_format(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        main.main(['--config', str(cli_config), '--out', str(out), '--format', 'json',
                   'probabilities', '--lam', '8', '--mu', '0.1', '--t', '0:1:3'])
        payload = json.loads((out / 'probabilities.json').read_text())
        assert payload['meta']['mu'] == 0.1
        assert len(payload['rows']) == 3


class TestSplittings:

    ARGS = ('splittings', '--mu', '-0.2', '--lambda', '2', '--extent', '3', '--n', '101')

    def test_rows_and_cache(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        assert run_cli(cli_config, out, *self.ARGS) == main.EXIT_OK
        rows = read_csv(str(out / 'splittings.csv'))['rows']
        assert len(rows) == 1
        assert 'non-semiclassical' in rows[0]['flag']
        assert rows[0]['dE_P_num'] > 0
        assert (out / 'plot_negmu.csv').exists()

        schema, _ = ledger(tmp_path)
        cached = schema.get_connection().execute('SELECT COUNT(*) FROM eigen_cache').fetchone()[0]
        schema.close()
        assert cached == 4

        assert run_cli(cli_config, out, *self.ARGS) == main.EXIT_OK
        again = read_csv(str(out / 'splittings.csv'))['rows']
        assert again[0]['dE_P_num'] == rows[0]['dE_P_num']

    def test_no_cache_flag(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        assert main.main(['--config', str(cli_config), '--out', str(out), '--no-cache', *self.ARGS]) == 0
        schema, _ = ledger(tmp_path)
        cached = schema.get_connection().execute('SELECT COUNT(*) FROM eigen_cache').fetchone()[0]
        schema.close()
        assert cached == 0


class TestComposite:

    def test_maps_and_validates(self, cli_config, tmp_path):
        out = tmp_path / 'out'
        code = run_cli(cli_config, out, 'composite', '--m', '1', '--omega', '1', '--Omega', '10',
                       '--a', '1', '--L', '0.5')
        assert code == main.EXIT_OK
        payload = json.loads((out / 'composite.json').read_text())
        assert payload['report']['four_well'] is True
        assert payload['equal'] is False
        assert 'rigid' in payload

        code = run_cli(cli_config, tmp_path / 'again', 'validate', '--params', str(out / 'composite.json'))
        assert code == main.EXIT_OK

    def test_missing_parameters(self, cli_config, tmp_path):
        assert run_cli(cli_config, tmp_path / 'out', 'composite', '--m', '1') == main.EXIT_DOMAIN
