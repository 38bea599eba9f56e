"""
Tests for scaled arithmetic and the F~, m~, d~ sequences
"""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.errors import DomainError, NumericOverflow
from core.model import model_birth_death, model_constant_column, model_uniform_catastrophe
from core.oracles import birth_death_1_2, constant_column_F0, constant_column_m, uniform_catastrophe_F0
from core.scaled import ScaledArray, ScaledReal
from core.sequences import CoefficientVector, SequenceTable, required_digits


# -- scaled reals ----------------------------------------------------------------

def test_scaled_real_arithmetic():
    x, y = ScaledReal.from_float(3.0), ScaledReal.from_float(-2.0)
    assert float(x * y) == pytest.approx(-6.0)
    assert float(x + y) == pytest.approx(1.0)
    assert float(y - x) == pytest.approx(-5.0)
    assert float(x / y) == pytest.approx(-1.5)
    assert (x - x).is_zero
    assert y < x and x >= y


def test_scaled_real_beyond_double_range():
    big = ScaledReal.from_float(1e300) * ScaledReal.from_float(1e300)
    assert not big.representable
    assert big.log10() == pytest.approx(600.0)
    assert float(big) == math.inf
    assert float(big / big) == pytest.approx(1.0)
    with pytest.raises(NumericOverflow):
        ScaledReal.from_float(math.nan)


def test_scaled_array_sums():
    arr = ScaledArray.from_floats([1.0, -2.0, 3.0, 0.0])
    assert arr.cumsum().to_floats() == pytest.approx([1.0, -1.0, 2.0, 2.0])
    assert arr.exclusive_cumsum().to_floats() == pytest.approx([0.0, 1.0, -1.0, 2.0])
    assert arr.suffix_sums().to_floats() == pytest.approx([2.0, 1.0, 3.0, 0.0])
    assert float(arr.total()) == pytest.approx(2.0)


@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=40))
def test_scaled_cumsum_matches_numpy(values):
    arr = ScaledArray.from_floats(values)
    expected = np.cumsum(values)
    scale = np.cumsum(np.abs(values)) + 1e-300
    assert np.all(np.abs(arr.cumsum().to_floats() - expected) <= 1e-9 * scale)


# -- coefficient vectors ------------------------------------------------------------

def test_coefficient_presets():
    assert CoefficientVector.zero().is_zero
    assert CoefficientVector.constant(0.5)(7) == 0.5
    assert CoefficientVector.killing(0.5)(7) == -0.5
    assert CoefficientVector.preset('minus', 2.0).label == 'minus(2)'
    assert CoefficientVector([0.0, -1.0, 2.0]).array(2).tolist() == [0.0, -1.0, 2.0]
    assert CoefficientVector(lambda i: -i).array(3).tolist() == [0.0, -1.0, -2.0, -3.0]
    with pytest.raises(DomainError):
        CoefficientVector.preset('sideways')
    with pytest.raises(DomainError):
        CoefficientVector(math.inf)
    with pytest.raises(DomainError):
        CoefficientVector([0.0, math.nan])
    with pytest.raises(IndexError):
        CoefficientVector([0.0, 1.0])(2)


# -- sequences -----------------------------------------------------------------

def test_birth_death_hand_values(bd12):
    table = SequenceTable(bd12, None, 40)
    F, m, d = table.F0.to_floats(), table.m.to_floats(), table.d.to_floats()
    for n in range(41):
        Fn, mn, dn = birth_death_1_2(n)
        assert F[n] == pytest.approx(Fn, rel=1e-12)
        assert m[n] == pytest.approx(mn, rel=1e-12)
        assert d[n] == pytest.approx(dn, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize('a, b, c', [(1.0, 1.0, 0.0), (2.0, 3.0, 0.0), (2.0, 0.5, -0.5), (1.0, 2.0, 0.3)])
def test_uniform_catastrophe_product_formula(a, b, c):
    N = 300
    model = model_uniform_catastrophe(a, b, 1.0)
    table = SequenceTable(model, CoefficientVector(c), N)
    closed = uniform_catastrophe_F0(a, b, N, c)
    assert np.all(table.F0.sign[1:] == 1)
    assert np.max(np.abs(table.F0.log[1:] - closed.log[1:])) <= 1e-10


@pytest.mark.parametrize('up', ['i+1', '(i+1)^2', '2*(i+1)'])
def test_constant_column_product_formulas(up):
    N = 300
    model = model_constant_column(1.0, up)
    table = SequenceTable(model, None, N)
    rate = model.up
    assert np.max(np.abs(table.m.log - constant_column_m(1.0, rate, N).log)) <= 1e-10
    assert np.max(np.abs(table.F0.log[1:] - constant_column_F0(1.0, rate, N).log[1:])) <= 1e-10


@pytest.mark.parametrize('model', [
    model_uniform_catastrophe(1.0, 1.0, 1.0),
    model_uniform_catastrophe(2.0, 3.0, 1.0),
    model_birth_death(1.0, 2.0),
    model_birth_death(2.0, 1.0),
    model_constant_column(1.0, 'i+1'),
    model_constant_column(1.0, '(i+1)^2'),
])
@pytest.mark.parametrize('c', [CoefficientVector.zero(), CoefficientVector.killing(0.5)])
def test_three_sequence_identity(model, c):
    assert SequenceTable(model, c, 300).identity_error() <= 1e-12


def test_dual_representation(random_model):
    for seed in range(5):
        table = SequenceTable(random_model(seed, 25), None, 25, columns='all')
        for i in range(0, 25, 4):
            forward, dual = table.column(i), table.dual_column(i)
            nz = forward.sign != 0
            assert np.array_equal(forward.sign[nz], dual.sign[nz])
            assert np.max(np.abs(dual.log[nz] - forward.log[nz])) <= 1e-10


def test_columns_vanish_above_diagonal(uc11):
    table = SequenceTable(uc11, None, 20)
    col = table.column(5)
    assert np.all(col.sign[:5] == 0)
    assert float(table.F(5, 5)) == pytest.approx(1.0)


def test_precise_twin_agrees(uc11):
    table = SequenceTable(uc11, None, 200)
    precise = table.precise(extra_digits=20)
    for n in (0, 1, 10, 100, 200):
        assert float(precise.F0[n]) == pytest.approx(float(table.F0[n]), rel=1e-12)
        assert float(precise.d[n]) == pytest.approx(float(table.d[n]), rel=1e-12, abs=1e-300)
        assert float(precise.m[n]) == pytest.approx(float(table.m[n]), rel=1e-12)


def test_required_digits():
    assert required_digits(0.0, 30) == 30
    assert required_digits(99.5 * math.log(10), 30) == 130
    assert required_digits(1e6, 30, max_digits=500) == 500


def test_huge_magnitudes_stay_scaled():
    table = SequenceTable(model_birth_death(1.0, 3.0), None, 800)
    assert table.F0.max_log() == pytest.approx(800 * math.log(3.0), rel=1e-12)
    assert not np.all(table.F0.representable)
    assert np.isinf(table.F0.to_floats()[-1])
    assert table.identity_error() <= 1e-11


def test_to_frame(bd12):
    frame = SequenceTable(bd12, None, 10).to_frame()
    assert list(frame.columns) == ['n', 'F0_sign', 'F0_log', 'F0', 'm_sign', 'm_log', 'm',
                                   'd_sign', 'd_log', 'd']
    row = frame[frame['n'] == 3].iloc[0]
    assert row['F0'] == pytest.approx(8.0)
    assert row['m'] == pytest.approx(15.0)
    assert row['d'] == pytest.approx(7.0)
