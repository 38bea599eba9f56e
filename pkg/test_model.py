"""
Tests for models, model specs, expressions and options
"""
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.config import AnalysisOptions, load_options
from core.errors import ConfigError, DomainError, HorizonExceeded, SpecError, StructureError
from core.expressions import compile_expression
from core.model import (RateRow, SingleDeathModel, build_tabulated, model_birth_death,
                        model_constant_column, model_expression, model_uniform_catastrophe)
from core.reproduce import random_rows
from core.specs import load_model, model_from_spec


@pytest.mark.parametrize('model', [
    model_uniform_catastrophe(2.0, 3.0, 1.0),
    model_constant_column(1.0, 'i+1'),
    model_birth_death(1.0, 2.0),
    model_expression('i+1', {'0': '1', 'i-1': '2'}),
])
def test_conservativity(model):
    for i in range(30):
        row = model.row(i)
        assert model.total_rate(i) == pytest.approx(row.up + sum(row.down.values()), rel=0, abs=1e-15)


@given(st.integers(min_value=0, max_value=10_000))
def test_random_rows_conservative(seed):
    rows = random_rows(np.random.default_rng(seed), 12)
    model = build_tabulated(rows)
    assert model.horizon == 13
    for i in range(13):
        row = model.row(i)
        assert row.total == pytest.approx(row.up + row.down_total)
        assert all(j < i for j in row.down)


def test_uniform_catastrophe_rows():
    model = model_uniform_catastrophe(2.0, 3.0, 1.0)
    assert model.row(0).up == 1.0
    assert model.row(0).down == {}
    row = model.row(4)
    assert row.up == 12.0
    assert row.down == {0: 2.0, 1: 2.0, 2: 2.0, 3: 2.0}
    assert model.down_runs(4) == [(0, 4, 2.0)]


def test_down_runs_split_on_rate_changes():
    model = build_tabulated([RateRow(1.0), RateRow(1.0, {0: 1.0}), RateRow(1.0, {0: 1.0, 1: 2.0}),
                             RateRow(1.0, {0: 0.5, 1: 0.5, 2: 3.0})])
    assert model.down_runs(3) == [(0, 2, 0.5), (2, 3, 3.0)]
    assert model.down_dense(3).tolist() == [0.5, 0.5, 3.0]


@pytest.mark.parametrize('up, down', [
    (0.0, {}),
    (-1.0, {}),
    (float('inf'), {}),
    (1.0, {2: 1.0}),
])
def test_bad_rows_rejected(up, down):
    with pytest.raises(StructureError):
        build_tabulated([RateRow(1.0), RateRow(1.0, {0: 1.0}), RateRow(up, down)])


def test_negative_down_rate_rejected():
    with pytest.raises(StructureError):
        RateRow(1.0, {0: -0.5})


def test_tabulated_horizon():
    model = build_tabulated([RateRow(1.0), RateRow(1.0, {0: 1.0})])
    assert model.horizon == 2
    model.check_state(1)
    with pytest.raises(HorizonExceeded):
        model.row(2)


def test_generated_rows_are_validated_lazily():
    model = model_birth_death('i+1', '2 - i')
    assert model.row(1).down == {0: 1.0}
    with pytest.raises(DomainError):
        model.row(3)


def test_irreducibility_warning_for_pure_births():
    model = model_expression('1', {})
    warnings = model.irreducibility_warnings(10)
    assert any('non-irreducible-down' in w for w in warnings)


def test_expression_grammar():
    f = compile_expression('2*(i+1)^2 - i/2')
    assert f(3) == pytest.approx(2 * 16 - 1.5)
    assert compile_expression('i**2')(4) == 16.0


@pytest.mark.parametrize('text', ['', 'sin(i)', 'j + 1', 'i if i else 1', '"a"', 'i % 2', '[i]'])
def test_expression_rejects(text):
    with pytest.raises(SpecError):
        compile_expression(text)


def test_expression_division_by_zero():
    with pytest.raises(SpecError):
        compile_expression('1/i')(0)


def test_expression_model_targets():
    model = model_expression('i+1', {'all': '0.5', 'i-1': '1'})
    assert model.row(3).down == {0: 0.5, 1: 0.5, 2: 1.5}
    with pytest.raises(DomainError):
        model_expression('1', {'k': '1'})


def test_single_death_structure():
    sd = SingleDeathModel([0.0, 1.0, 2.0], [{1: 0.5, 2: 0.25}, {2: 1.0}, {}])
    Q = sd.rate_matrix()
    assert np.allclose(Q.sum(axis=1), 0.0)
    assert sd.upper_partial(0).tolist() == [0.75, 0.25]
    with pytest.raises(StructureError):
        SingleDeathModel([0.0, 1.0], [{0: 1.0}, {}])
    with pytest.raises(StructureError):
        SingleDeathModel([0.0, 0.0], [{}, {}])


# -- specs ---------------------------------------------------------------------

def test_bundled_specs_load(models_dir):
    paths = sorted(models_dir.glob('*.json'))
    assert len(paths) >= 6
    for path in paths:
        model = load_model(path)
        echo = model.describe()
        assert echo['kind'] in ('tabulated', 'uniform_catastrophe', 'constant_column', 'birth_death', 'expression')
        assert echo['name'] == model.name
        model.row(1)


def test_inline_spec_and_echo():
    model = load_model('{"kind": "birth_death", "up": 1, "down": "2", "horizon": 50}')
    assert model.horizon == 50
    assert model.describe() == {'kind': 'birth_death', 'up': 1.0, 'down': '2', 'name': 'birth_death',
                                'horizon': 50}


@pytest.mark.parametrize('spec', [
    {'kind': 'uniform_catastrophe', 'a': 1, 'b': 1},
    {'kind': 'uniform_catastrophe', 'a': 1, 'b': 1, 'q01': 1, 'typo': 2},
    {'kind': 'nonsense'},
    {'kind': 'uniform_catastrophe', 'a': 'x', 'b': 1, 'q01': 1},
    {'kind': 'birth_death', 'up': 1, 'down': 2, 'horizon': 0},
    {'kind': 'expression', 'up': '1', 'down': ['i-1']},
])
def test_spec_errors(spec):
    with pytest.raises(SpecError):
        model_from_spec(spec)


def test_spec_missing_file(tmp_path):
    with pytest.raises(SpecError):
        load_model(tmp_path / 'missing.json')


# -- options -------------------------------------------------------------------

def test_load_options_defaults(tmp_path):
    analysis, simulation, output = load_options(tmp_path / 'absent.json')
    assert analysis == AnalysisOptions()
    assert simulation.samples == 10000
    assert output.format == 'json'


def test_load_options_rejects_unknown_keys(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'analysis': {'truncation': 500, 'windw': 3}}))
    with pytest.raises(ConfigError):
        load_options(path)


def test_load_options_validates(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps({'analysis': {'truncation': 1}}))
    with pytest.raises(ConfigError):
        load_options(path)


def test_threads_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv('BIRTHCHAIN_THREADS', '3')
    analysis, simulation, _ = load_options(tmp_path / 'absent.json')
    assert analysis.threads == 3
    assert simulation.workers == 3
    monkeypatch.setenv('BIRTHCHAIN_THREADS', 'many')
    with pytest.raises(ConfigError):
        load_options(tmp_path / 'absent.json')
