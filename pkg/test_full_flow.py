"""
End-to-end test of the birthchain command line, reports and exports
"""
import io
import json
import math
from pathlib import Path

import pandas as pd
import pytest
from openpyxl import load_workbook

from core.cli import run
from core.reports import AnalysisReport, ReportGenerator
from core.sequences import SequenceTable
from core.specs import load_model

ROOT = Path(__file__).resolve().parent
MODELS = ROOT / 'models'
CONFIG = str(ROOT / 'config.json')


def cli(*argv):
    """Exit code and standard output of one CLI run"""
    buf = io.StringIO()
    code = run(['--config', CONFIG, '-q', *argv], stream=buf)
    return code, buf.getvalue()


def model_path(name):
    return str(MODELS / f'{name}.json')


@pytest.fixture(scope='module')
def uc_report_json():
    code, text = cli('analyze', '--model', model_path('uniform_catastrophe'), '--N', '200',
                     '--lambda', '0.5', '--ell', '1', '--mz', '--format', 'json')
    assert code == 0
    return text


# [TEST 1] Sequences table
def test_sequences_table_birth_death():
    code, text = cli('sequences', '--model', model_path('birth_death_1_2'), '--N', '10')
    assert code == 0
    frame = pd.read_csv(io.StringIO(text))
    assert len(frame) == 11
    row = frame[frame['n'] == 3].iloc[0]
    assert row['F0'] == pytest.approx(8.0, rel=1e-12)
    assert row['m'] == pytest.approx(15.0, rel=1e-12)
    assert row['d'] == pytest.approx(7.0, rel=1e-12)


def test_sequences_sign_of_c():
    code, text = cli('sequences', '--model', model_path('birth_death_1_2'), '--N', '5',
                     '--lambda', '0.5', '--sign', '-', '--format', 'json')
    assert code == 0
    assert json.loads(text)['c'] == 'minus(0.5)'


# [TEST 2] Full analysis and the report schema
def test_analyze_verdicts(uc_report_json):
    payload = json.loads(uc_report_json)
    assert payload['N'] == 200
    assert payload['model_echo']['kind'] == 'uniform_catastrophe'
    for name in ('unique', 'recurrent', 'ergodic', 'strongly_ergodic', 'exp_ergodic', 'mz_condition'):
        assert payload['verdicts'][name] == 'Holds'
    assert payload['quantities']['d'] == pytest.approx(1.0, rel=1e-12)
    assert set(payload['versions']) >= {'birthchain', 'numpy', 'mpmath'}


def test_report_json_round_trip(uc_report_json):
    report = AnalysisReport.from_json(uc_report_json)
    assert report.to_json(2) == uc_report_json.rstrip('\n')


def test_human_format_carries_every_field(uc_report_json):
    report = AnalysisReport.from_json(uc_report_json)
    text = report.to_human()
    for name, entry in report.entries.items():
        assert name in text
        for key in entry.diagnostics:
            assert key in text
    assert report.model_echo['name'] in text
    for key in report.model_echo:
        if key != 'name':
            assert key in text
    for key in report.parameters:
        assert key in text


def test_analyze_csv_and_excel(tmp_path):
    excel = tmp_path / 'uc.xlsx'
    code, text = cli('analyze', '--model', model_path('uniform_catastrophe'), '--N', '100',
                     '--format', 'csv', '--excel', str(excel))
    assert code == 0
    frame = pd.read_csv(io.StringIO(text))
    assert list(frame.columns) == ['entry', 'verdict', 'value', 'certificate', 'error']
    assert frame.set_index('entry').loc['unique', 'verdict'] == 'Holds'
    wb = load_workbook(excel)
    assert wb.sheetnames == ['Analysis', 'Summary']
    assert wb['Analysis']['A4'].value == 'Entry'


def test_excel_with_sequences_sheet(tmp_path, uc_report_json):
    report = AnalysisReport.from_json(uc_report_json)
    frame = SequenceTable(load_model(model_path('uniform_catastrophe')), None, 20).to_frame()
    gen = ReportGenerator()
    path = gen.generate_excel(report, str(tmp_path / 'full.xlsx'), frame)
    wb = load_workbook(path)
    assert wb.sheetnames == ['Analysis', 'Summary', 'Sequences']
    assert wb['Sequences'].max_row == 22
    stats = gen.get_statistics(report)
    assert stats['counts']['Holds'] == stats['total_verdicts']
    csv_path = gen.generate_csv(frame, str(tmp_path / 'seq.csv'))
    assert len(pd.read_csv(csv_path)) == 21


# [TEST 3] Single-quantity commands
def test_poisson_command():
    code, text = cli('poisson', '--model', model_path('birth_death_1_2'), '--N', '30',
                     '--c-preset', 'minus', '0.5', '--f', 'i/10', '--g0', '2')
    assert code == 0
    payload = json.loads(text)
    assert payload['c'] == 'minus(0.5)'
    assert payload['g'][0] == 2.0
    assert payload['residual'] <= 1e-9 * max(1.0, max(abs(x) for x in payload['g']))

    code, text = cli('poisson', '--model', model_path('birth_death_1_2'), '--N', '10',
                     '--c-preset', 'minus', '0.5', '--f', '1', '--finite')
    assert code == 0
    assert json.loads(text)['status'] == 'determined'


def test_poisson_preset_command():
    code, text = cli('poisson', '--model', model_path('uniform_catastrophe_a2b3'), '--N', '40',
                     '--c-preset', 'minus', '0.5', '--f', 'laplace', '--g0', '0.5')
    assert code == 0
    payload = json.loads(text)
    assert payload['residual'] <= 1e-9 * max(1.0, max(abs(x) for x in payload['g']))


def test_moment_and_transform_commands():
    code, text = cli('moments', '--model', model_path('birth_death_1_2'), '--N', '200')
    assert code == 0
    assert json.loads(text)['E_i0'] == pytest.approx(2.0, rel=1e-9)

    code, text = cli('laplace', '--model', model_path('uniform_catastrophe_a2b3'), '--N', '200',
                     '--lambda', '0.5', '--format', 'human')
    assert code == 0
    assert 'values: 0.533333' in text

    code, text = cli('expmoment', '--model', model_path('uniform_catastrophe'), '--N', '200',
                     '--lambda', '0.5', '--format', 'csv')
    assert code == 0
    frame = pd.read_csv(io.StringIO(text))
    assert frame['values'][0] == pytest.approx(4.0, rel=1e-9)
    assert frame['values'][5] == pytest.approx(2.0, rel=1e-9)


def test_simulate_command():
    code, text = cli('simulate', '--model', model_path('birth_death_1_2'), '--samples', '2000',
                     '--seed', '3', '--level-cap', '200')
    assert code == 0
    payload = json.loads(text)
    assert payload['samples'] == 2000
    assert abs(payload['mean'] - 2.0) <= 4 * payload['std_error']


def test_simulate_lifetime_command():
    code, text = cli('simulate', '--model', model_path('constant_column_quadratic'), '--of', 'lifetime',
                     '--samples', '500', '--seed', '5', '--level-cap', '100')
    assert code == 0
    payload = json.loads(text)
    assert payload['of'] == 'lifetime'
    assert payload['mean'] > 0
    assert payload['bracket'][1] == math.inf


def test_validate_command():
    code, text = cli('validate', '--model', model_path('tabulated_small'), '--rows', '10')
    assert code == 0
    echo = json.loads(text)
    assert echo['horizon'] == 5
    assert len(echo['first_rows']) == 5


def test_truncation_follows_horizon():
    code, text = cli('sequences', '--model', model_path('tabulated_small'), '--N', '50')
    assert code == 0
    assert len(pd.read_csv(io.StringIO(text))) == 5


# [TEST 4] Exit codes and error objects
@pytest.mark.parametrize('argv, expected', [
    ((), 2),
    (('analyze',), 2),
    (('simulate', '--model', model_path('birth_death_1_2'), '--stop', 'sideways'), 2),
    (('sequences', '--model', model_path('birth_death_1_2'), '--N', '10', '--lambda', 'nan'), 2),
    (('sequences', '--model', model_path('birth_death_1_2'), '--N', '10', '--lambda', '-1',
      '--sign', '-'), 2),
    (('poisson', '--model', model_path('birth_death_1_2'), '--c-preset', 'minus', 'inf'), 2),
    (('poisson', '--model', model_path('birth_death_1_2'), '--g0', 'nan'), 2),
    (('poisson', '--model', model_path('uniform_catastrophe_a2b3'), '--N', '20',
      '--c-preset', 'plus', '0.5', '--f', 'laplace'), 2),
    (('analyze', '--model', '{"kind": "nonsense"}'), 3),
    (('analyze', '--model', '{"kind": "birth_death", "up": 1, "down": 2}', '--N', '1'), 3),
    (('expmoment', '--model', '{"kind": "uniform_catastrophe", "a": 1, "b": 1, "q01": 1}',
      '--N', '50', '--lambda', '1.5'), 4),
])
def test_exit_codes(argv, expected, capsys):
    code, _ = cli(*argv)
    assert code == expected
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert {'error', 'message'} <= set(error)


def test_numeric_error_object(capsys):
    code, _ = cli('expmoment', '--model', model_path('uniform_catastrophe'), '--N', '50', '--lambda', '1.5')
    assert code == 4
    error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert error['error'] == 'RateBoundViolated'
    assert error['state'] == 0


# [TEST 5] Reproduction suite
def test_reproduce_filter():
    code, text = cli('reproduce', '--filter', 'mz-condition', '--N', '300', '--format', 'json')
    assert code == 0
    payload = json.loads(text)
    assert payload['passed'] is True
    assert [c['check'] for c in payload['checks']] == ['mz-condition']


def test_reproduce_monotone_limit():
    code, text = cli('reproduce', '--filter', 'monotone-limit', '--N', '200', '--format', 'json')
    assert code == 0
    payload = json.loads(text)
    assert payload['passed'] is True
    assert [c['check'] for c in payload['checks']] == ['monotone-limit']
