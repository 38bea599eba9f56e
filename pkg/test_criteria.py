"""
Tests for the criteria and the quantities built on the sequences
"""
import math

import numpy as np
import pytest

from core.criteria import (_LADDER, _apply_ladder, analyze, decay_profile, exp_moment_return,
                           hitting_moment, laplace_return, lifetime_moment, lifetime_transforms,
                           mean_return_time, mz_sufficient_condition, recurrence, return_probability,
                           uniqueness)
from core.errors import (DomainError, NotExplosive, PreconditionViolated, RateBoundViolated)
from core.model import model_constant_column, model_uniform_catastrophe
from core.oracles import (constant_column_m, dense_mean_hitting_times, mean_return_time_oracle,
                          uniform_catastrophe_exp_moment, uniform_catastrophe_laplace)
from core.poisson import poisson_residual
from core.reports import ReportEntry
from core.sequences import CoefficientVector
from core.series import Status, Verdict


# -- series criteria ---------------------------------------------------------------

def test_uniqueness_dichotomy(opts):
    explosive = uniqueness(model_constant_column(1.0, '(i+1)^2'), 500, opts)
    assert explosive.fails
    assert explosive.diagnostics['kummer_kappa_prime'] > 1
    assert uniqueness(model_constant_column(1.0, 'i+1'), 500, opts).holds


def test_recurrence(uc11, bd12, bd21, opts):
    assert recurrence(uc11, 300, opts).holds
    assert recurrence(bd12, 300, opts).holds
    assert recurrence(bd21, 300, opts).fails


def test_return_probability_transient(bd21, opts):
    mv = return_probability(bd21, 100, opts)
    n = np.arange(1, 21)
    assert mv.values[1:21] == pytest.approx(0.5 ** n, rel=1e-9)
    assert mv[0] == pytest.approx(0.5, rel=1e-9)


def test_return_probability_recurrent(bd12, opts):
    mv = return_probability(bd12, 100, opts)
    assert np.all(mv.values == 1.0)


# -- mean return time ----------------------------------------------------------------

def test_mean_return_time_birth_death(bd12, opts):
    result = mean_return_time(bd12, 200, opts)
    assert result.d.value == pytest.approx(1.0, rel=1e-12)
    assert result.E[0] == pytest.approx(2.0, rel=1e-12)
    assert result.E.values[1:21] == pytest.approx(np.arange(1, 21), rel=1e-9)
    assert result.E.reliable_upto >= 20
    assert result.ergodic.holds
    assert result.strongly_ergodic.fails


def test_mean_return_time_uniform_catastrophe(uc11, opts):
    result = mean_return_time(uc11, 300, opts)
    assert result.d.value == pytest.approx(1.0, rel=1e-12)
    assert result.E[0] == pytest.approx(2.0, rel=1e-12)
    assert result.E.values[1:51] == pytest.approx(np.ones(50), rel=1e-9)
    assert result.strongly_ergodic.holds
    assert result.sup == pytest.approx(1.0, rel=1e-9)


def test_mean_return_time_transient(bd21, opts):
    result = mean_return_time(bd21, 100, opts)
    assert result.ergodic.fails
    assert np.all(np.isinf(result.E.values))


def test_mean_return_time_matches_dense_oracles(bd12, uc11, opts):
    assert mean_return_time(bd12, 200, opts).E[0] == pytest.approx(mean_return_time_oracle(bd12, 60), rel=1e-6)
    dense = dense_mean_hitting_times(uc11, 0, 60)
    ours = mean_return_time(uc11, 300, opts).E.values
    assert ours[:20] == pytest.approx(dense[:20], rel=1e-9)


def test_constant_column_linear_is_strongly_ergodic(opts):
    result = mean_return_time(model_constant_column(1.0, 'i+1'), 1000, opts,
                              unique=uniqueness(model_constant_column(1.0, 'i+1'), 1000, opts))
    assert result.d.value == pytest.approx(1.0, rel=1e-6)
    assert result.strongly_ergodic.holds


# -- polynomial moments ------------------------------------------------------------

def test_hitting_moment_first_order_matches_mean(bd12, opts):
    hit = hitting_moment(bd12, 0, 1, 200, opts)
    assert hit.E_i0 == pytest.approx(2.0, rel=1e-9)
    assert hit.E.values[1:11] == pytest.approx(np.arange(1, 11), rel=1e-9)


def test_hitting_moment_other_target(bd12, opts):
    # from 1: stay 1/3, then one excursion up or down of mean 1
    assert hitting_moment(bd12, 1, 1, 200, opts).E_i0 == pytest.approx(4.0 / 3.0, rel=1e-9)


def test_second_moment_of_return_time(bd12, opts):
    # sigma_0 = Exp(1) + busy period with E B = 1, E B^2 = 4
    assert hitting_moment(bd12, 0, 2, 300, opts).E_i0 == pytest.approx(8.0, rel=1e-6)


def test_hitting_moment_rejects_bad_arguments(bd12, opts):
    with pytest.raises(DomainError):
        hitting_moment(bd12, 0, 0, 50, opts)
    with pytest.raises(DomainError):
        hitting_moment(bd12, 50, 1, 50, opts)
    with pytest.raises(DomainError):
        mean_return_time(bd12, 1, opts)


def test_lifetime_moment_explosive(explosive, opts):
    N = 500
    mv = lifetime_moment(explosive, 1, N, opts)
    partial = float(np.sum(constant_column_m(1.0, explosive.up, N).to_floats()))
    # sum of m_k beyond N is at most prod(1 + 1/k^2) / (N + 1) < 3.7 / N
    assert partial < mv[0] < partial + 2 * 3.7 / N
    assert np.all(np.diff(mv.values) < 0)


def test_lifetime_needs_explosion(uc11, opts):
    with pytest.raises(NotExplosive):
        lifetime_moment(uc11, 1, 200, opts)
    with pytest.raises(NotExplosive):
        lifetime_transforms(uc11, 1.0, 200, 'laplace', opts)


def test_lifetime_laplace_increasing(explosive, opts):
    mv = lifetime_transforms(explosive, 1.0, 300, 'laplace', opts)
    assert np.all(np.diff(mv.values) > 0)
    assert 0 < mv[0] and mv.values[-1] < 1


# -- exponential moments and transforms ----------------------------------------------

def test_exp_moment_uniform_catastrophe(uc11, opts):
    E0, En = uniform_catastrophe_exp_moment(1.0, 1.0, 0.5)
    result = exp_moment_return(uc11, 0.5, 300, opts)
    assert result.feasible.holds
    assert result.d_tilde.value == pytest.approx(2.0, rel=1e-9)
    assert result.E[0] == pytest.approx(E0, rel=1e-9)
    assert result.E.values[1:21] == pytest.approx(np.full(20, En), rel=1e-9)


def test_exp_moment_rate_bound(uc11, opts):
    with pytest.raises(RateBoundViolated) as info:
        exp_moment_return(uc11, 1.5, 100, opts)
    assert info.value.state == 0


@pytest.mark.parametrize('b', [3.0, 0.5, 5.0])
def test_laplace_uniform_catastrophe_independent_of_b(b, opts):
    E0, En = uniform_catastrophe_laplace(2.0, 1.0, 0.5)
    assert E0 == pytest.approx(8.0 / 15.0)
    mv = laplace_return(model_uniform_catastrophe(2.0, b, 1.0), 0.5, 300, opts)
    assert mv[0] == pytest.approx(E0, rel=1e-9)
    assert mv.values[1:21] == pytest.approx(np.full(20, En), rel=1e-9)


def test_laplace_needs_recurrence(bd21, opts):
    with pytest.raises(PreconditionViolated):
        laplace_return(bd21, 0.5, 100, opts, recurrent=recurrence(bd21, 100, opts))
    with pytest.raises(DomainError):
        laplace_return(bd21, 0.0, 100, opts)


def test_transform_derivative_is_mean(uc11, opts):
    h = 1e-5
    mean = mean_return_time(uc11, 300, opts).E.values[:11]
    lap = laplace_return(uc11, h, 300, opts).values[:11]
    exp = exp_moment_return(uc11, h, 300, opts).E.values[:11]
    assert (lap - exp) / (2 * h) == pytest.approx(-mean, rel=1e-4)
    assert np.all((lap > 0) & (lap <= 1))
    assert np.all(exp >= 1)


def test_decay_profile(uc11, opts):
    lam, N = 0.5, 20
    profile = decay_profile(uc11, lam, 2.0, N, opts)
    assert profile.g[0] == 2.0
    scale = max(1.0, float(np.max(np.abs(profile.g))))
    assert poisson_residual(uc11, CoefficientVector.constant(lam), 0.0, profile.g, N) <= 1e-9 * scale
    assert profile.first_nonpositive is not None
    assert decay_profile(uc11, 1e-6, 1.0, 10, opts).first_nonpositive is None
    assert np.all(decay_profile(uc11, lam, 0.0, N, opts).g == 0.0)


# -- MZ condition ------------------------------------------------------------------

def test_mz_condition(uc11, opts):
    finite = mz_sufficient_condition(uc11, 1000, opts)
    assert finite.sufficient.holds
    assert math.isfinite(finite.M.value)
    divergent = mz_sufficient_condition(model_constant_column(1.0, '2*(i+1)'), 1000, opts)
    assert divergent.M.is_infinite
    assert divergent.sufficient.fails


def test_mz_needs_recurrence(bd21, opts):
    with pytest.raises(PreconditionViolated):
        mz_sufficient_condition(bd21, 100, opts)


# -- full analysis -----------------------------------------------------------------

def test_analyze_uniform_catastrophe(uc11, opts):
    report = analyze(uc11, 300, opts, lam=0.5, ell=1, mz=True)
    for name in ('unique', 'recurrent', 'ergodic', 'strongly_ergodic', 'exp_ergodic', 'mz_condition'):
        assert report.verdicts[name] == 'Holds', name
    assert report['d'].value == pytest.approx(1.0, rel=1e-12)
    assert report['E0_sigma0'].value == pytest.approx(2.0, rel=1e-12)
    assert report['return_prob'].value[:5] == [1.0] * 5
    assert report['hitting_moment_1'].value[1] == pytest.approx(1.0, rel=1e-9)
    assert not report.errors


def test_analyze_explosive_collects_errors(explosive, opts):
    report = analyze(explosive, 300, opts, lam=1.0, ell=1)
    assert report.verdicts['unique'] == 'Fails'
    assert 'assumption' in report['recurrent'].diagnostics
    assert 'lifetime_moment_1' in report.quantities
    assert 'laplace_lifetime' in report.quantities
    # the rate bound breaks at state 0 where q_0 = 1
    assert report.errors['exp_ergodic']['error'] == 'RateBoundViolated'


@pytest.mark.parametrize('model', [
    model_uniform_catastrophe(1.0, 1.0, 1.0),
    model_constant_column(1.0, '(i+1)^2'),
    model_uniform_catastrophe(2.0, 3.0, 1.0),
])
def test_ladder_is_consistent(model, opts):
    verdicts = analyze(model, 200, opts, lam=0.25, mz=True).verdicts
    for weaker, stronger in _LADDER:
        if verdicts.get(stronger) == 'Holds':
            assert verdicts.get(weaker) == 'Holds'


def test_ladder_downgrades_unsupported_holds():
    entries = {
        'unique': ReportEntry('unique', Verdict(Status.HOLDS, {})),
        'recurrent': ReportEntry('recurrent', Verdict(Status.INCONCLUSIVE, {'window_growth_log': 0.1})),
        'ergodic': ReportEntry('ergodic', Verdict(Status.HOLDS, {'d': 1.0})),
    }
    _apply_ladder(entries)
    assert entries['ergodic'].status == 'Inconclusive'
    assert entries['ergodic'].diagnostics['downgraded_from'] == 'Holds'
    assert entries['unique'].status == 'Holds'
