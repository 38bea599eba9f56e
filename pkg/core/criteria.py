"""
Criteria and quantities of a single birth process

uniqueness, recurrence, return probabilities, mean return time and (strong) ergodicity,
polynomial moments of hitting and life times, exponential moments and Laplace transforms,
the Kummer constant and the MZ sufficient condition, plus ``analyze`` which runs them all
and assembles an ``AnalysisReport``.

Differences of exponentially large, nearly equal terms (F_k d - d_k and its tilted forms)
are evaluated in mpmath at a working precision chosen from the magnitude span of the
scaled tables.
"""
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import AnalysisOptions
from .errors import (DomainError, FeasibilityViolated, InconclusiveSeries, NotExplosive,
                     NumericError, PreconditionViolated, PreviousOrderInfinite,
                     RateBoundViolated, ConditionViolated)
from .model import SingleBirthModel
from .poisson import rate_to
from .reports import AnalysisReport, ReportEntry, package_versions
from .scaled import ScaledArray, ScaledReal
from .sequences import CoefficientVector, PreciseSequences, SequenceTable
from .series import (Conclusion, LimitEstimate, Status, Verdict, estimate_limit, kummer_test,
                     raabe_tail, series_divergence)

logger = logging.getLogger(__name__)

__all__ = [
    'MomentVector', 'MeanReturnTime', 'HittingMoment', 'ExpMoment', 'DecayProfile', 'MZCondition',
    'uniqueness', 'recurrence', 'return_probability', 'mean_return_time', 'hitting_moment',
    'lifetime_moment', 'exp_moment_return', 'laplace_return', 'lifetime_transforms',
    'decay_profile', 'kummer_test', 'mz_sufficient_condition', 'analyze',
]

to_float = PreciseSequences.to_float


@dataclass
class MomentVector:
    """Values over the states 0..N of one quantity (E_n sigma_0, E_n e^{-lam sigma_0}, ...)"""
    values: np.ndarray
    quantity: str
    reliable_upto: Optional[int] = None
    notes: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, n: int) -> float:
        return float(self.values[n])

    def head(self, count: int = 21) -> List[Optional[float]]:
        return [None if math.isnan(x) else float(x) for x in self.values[:count]]

    def to_dict(self, count: Optional[int] = None) -> Dict[str, Any]:
        values = self.values if count is None else self.values[:count]
        return {'quantity': self.quantity,
                'values': [None if math.isnan(x) else float(x) for x in values],
                'reliable_upto': self.reliable_upto, 'notes': list(self.notes)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MomentVector':
        values = np.array([math.nan if x is None else x for x in data['values']], dtype=float)
        return cls(values, data['quantity'], data.get('reliable_upto'), list(data.get('notes', [])))


def _resolve(model: SingleBirthModel, N: Optional[int],
             opts: Optional[AnalysisOptions]) -> Tuple[int, AnalysisOptions]:
    opts = opts or AnalysisOptions()
    N = opts.truncation if N is None else int(N)
    if N < 2:
        raise DomainError("truncation N must be at least 2", N=N)
    model.check_state(N)
    return N, opts


def _precise(table: SequenceTable, opts: AnalysisOptions) -> PreciseSequences:
    return table.precise(opts.extra_digits, opts.max_digits)


def _filled(value: ScaledReal, size: int) -> ScaledArray:
    return ScaledArray(np.full(size, value.sign), np.full(size, value.log_magnitude))


# -- limits in working precision ------------------------------------------------

@dataclass
class _RatioLimit:
    estimate: LimitEstimate
    value: Any          # mpf, math.inf or None
    delta: Any          # uncertainty of value (mpf)
    route: str

    @property
    def finite(self) -> bool:
        return self.value is not None and self.value is not math.inf

    @property
    def infinite(self) -> bool:
        return self.value is math.inf


def _ratio_limit(ctx, ratios: Sequence[Any], opts: AnalysisOptions, start: int, route: str) -> _RatioLimit:
    floats = np.array([math.nan if r is None else to_float(r) for r in ratios])
    estimate = estimate_limit(floats, opts, start=start)
    floor = ctx.mpf(10) ** (-(ctx.dps - 5))
    if estimate.is_unknown:
        return _RatioLimit(estimate, None, None, route)
    if estimate.is_infinite:
        return _RatioLimit(estimate, math.inf, ctx.mpf(0), route)
    window = [r for r in ratios[-opts.window:] if r is not None]
    if estimate.certificate == 'kummer-tail':
        last = window[-1]
        tail = ctx.mpf(estimate.value - to_float(last))
        value, delta = last + tail, abs(tail)
    else:
        value = max(window)
        delta = value - min(window)
    delta = max(delta, abs(value) * floor)
    return _RatioLimit(estimate, value, delta, route)


def _stolz_limit(ctx, num: Sequence[Any], den: Sequence[Any], opts: AnalysisOptions,
                 start: int = 0, den_offset: int = 0, indicator: bool = False) -> _RatioLimit:
    """limsup of sum(num)/(den_offset + sum(den)), via the term ratio num_n/den_n first.

    ``indicator`` zeroes the partial-sum ratio wherever its denominator is not positive.
    """
    zero = ctx.mpf(0)
    term = [n / d if d > 0 else None for n, d in zip(num, den)]
    stolz = _ratio_limit(ctx, term, opts, start, 'stolz')
    if stolz.infinite or (stolz.finite and stolz.estimate.certified_finite):
        return stolz
    partial: List[Any] = []
    acc_n, acc_d = zero, ctx.mpf(den_offset)
    for n_val, d_val in zip(num, den):
        acc_n += n_val
        acc_d += d_val
        if acc_d > 0:
            partial.append(acc_n / acc_d)
        else:
            partial.append(zero if indicator else None)
    fallback = _ratio_limit(ctx, partial, opts, start, 'partial-sums')
    if fallback.infinite or (fallback.finite and fallback.estimate.certified_finite):
        return fallback
    return stolz if not stolz.estimate.is_unknown else fallback


def _reliable_upto(errors: Sequence[Any], values: Sequence[Any], tol: float) -> int:
    """Largest n such that every entry up to n has error <= tol * max(1, |value|)"""
    last = -1
    for n, (err, val) in enumerate(zip(errors, values)):
        if err > tol * max(1, abs(val)):
            break
        last = n
    return last


def _limit_diagnostics(limit: _RatioLimit) -> Dict[str, Any]:
    return {'route': limit.route, 'window_max': max(limit.estimate.window_estimates, default=None),
            'window_min': min(limit.estimate.window_estimates, default=None),
            'converged': limit.estimate.converged, 'certificate': limit.estimate.certificate,
            'uncertainty': None if limit.delta is None else to_float(limit.delta)}


# -- series criteria ---------------------------------------------------------------

def uniqueness(model: SingleBirthModel, N: Optional[int] = None, opts: Optional[AnalysisOptions] = None,
               table: Optional[SequenceTable] = None) -> Verdict:
    """Non-explosion: the series sum m_n diverges"""
    N, opts = _resolve(model, N, opts)
    table = table or SequenceTable(model, None, N)
    verdict = series_divergence(table.m, opts, label='m')
    kummer = verdict.diagnostics.get('kummer', {})
    verdict.diagnostics['kummer_kappa_prime'] = kummer.get('kappa_prime')
    logger.info("uniqueness of %s at N=%d: %s", model.name, N, verdict.status.value)
    return verdict


def recurrence(model: SingleBirthModel, N: Optional[int] = None, opts: Optional[AnalysisOptions] = None,
               table: Optional[SequenceTable] = None, unique: Optional[Verdict] = None) -> Verdict:
    """Recurrence: the series sum F_n^(0) diverges"""
    N, opts = _resolve(model, N, opts)
    table = table or SequenceTable(model, None, N)
    verdict = series_divergence(table.F0, opts, label='F0')
    if unique is not None and not unique.holds:
        verdict.diagnostics['assumption'] = f"uniqueness is {unique.status.value}"
    logger.info("recurrence of %s at N=%d: %s", model.name, N, verdict.status.value)
    return verdict


def return_probability(model: SingleBirthModel, N: Optional[int] = None,
                       opts: Optional[AnalysisOptions] = None, table: Optional[SequenceTable] = None,
                       recurrent: Optional[Verdict] = None) -> MomentVector:
    """P_n(sigma_0 < inf): all ones when recurrent, tail ratios of sum F_k^(0) otherwise"""
    N, opts = _resolve(model, N, opts)
    table = table or SequenceTable(model, None, N)
    recurrent = recurrent or recurrence(model, N, opts, table)
    if recurrent.holds:
        return MomentVector(np.ones(N + 1), 'P_n(sigma_0<inf)', N)
    if not recurrent.fails:
        raise InconclusiveSeries("neither divergence nor convergence of sum F_n^(0) is certified",
                                 recurrent.diagnostics)
    F = table.F0
    tail = raabe_tail(F[max(0, N - opts.window):], N)
    if not math.isfinite(tail.log_magnitude):
        raise InconclusiveSeries("the tail of sum F_n^(0) could not be bounded", recurrent.diagnostics)
    tails = F.suffix_sums() + _filled(tail, N + 1)
    total = tails[0]
    ratios = (tails / total).to_floats()
    values = ratios.copy()
    values[0] = ratios[1]
    mv = MomentVector(values, 'P_n(sigma_0<inf)', N)
    mv.notes.append(f"tail beyond N estimated as {float(tail):.6g}")
    return mv


# -- mean return time and ergodicity ------------------------------------------------

@dataclass
class MeanReturnTime:
    d: LimitEstimate
    E: MomentVector
    ergodic: Verdict
    strongly_ergodic: Verdict
    sup: Optional[float] = None


def _strong_ergodicity(terms: List[float], E: np.ndarray, reliable: int, opts: AnalysisOptions,
                       diagnostics: Dict[str, Any]) -> Verdict:
    if reliable < 3:
        diagnostics['reliable_upto'] = reliable
        return Verdict(Status.INCONCLUSIVE, diagnostics)
    # E_r = sum_{k<r} t_k, so the window ends at t_{r-1}
    window = np.array(terms[max(0, reliable - opts.window):reliable])
    E_r = float(E[reliable])
    diagnostics['window_increment_sum'] = float(np.sum(np.abs(window)))
    diagnostics['partial_sum_at_reliable'] = E_r
    if np.sum(np.abs(window)) <= opts.ratio_tol * max(1.0, abs(E_r)):
        diagnostics['certificate'] = 'negligible-increments'
        return Verdict(Status.HOLDS, diagnostics)
    if np.all(window > 0):
        kummer = kummer_test(window, start=reliable - len(window), window=opts.window,
                             margin=opts.kummer_margin, tol=opts.ratio_tol)
        diagnostics['kummer'] = kummer.to_dict()
        if kummer.conclusion is Conclusion.CONVERGES:
            diagnostics['certificate'] = 'kummer'
            diagnostics['tail_bound'] = float(raabe_tail(window, reliable))
            return Verdict(Status.HOLDS, diagnostics)
        if kummer.conclusion is Conclusion.DIVERGES:
            diagnostics['certificate'] = 'kummer'
            return Verdict(Status.FAILS, diagnostics)
    return Verdict(Status.INCONCLUSIVE, diagnostics)


def mean_return_time(model: SingleBirthModel, N: Optional[int] = None,
                     opts: Optional[AnalysisOptions] = None, table: Optional[SequenceTable] = None,
                     precise: Optional[PreciseSequences] = None, recurrent: Optional[Verdict] = None,
                     unique: Optional[Verdict] = None) -> MeanReturnTime:
    """E_0 sigma_0 = 1/q01 + d and E_n sigma_0 = sum_{k<n} (F_k d - d_k), d = limsup d_n/F_n"""
    N, opts = _resolve(model, N, opts)
    table = table or SequenceTable(model, None, N)
    recurrent = recurrent or recurrence(model, N, opts, table)
    precise = precise or _precise(table, opts)
    ctx = precise.ctx
    limit = _stolz_limit(ctx, precise.d, precise.F0, opts)
    if limit.estimate.is_unknown:
        raise InconclusiveSeries("d could not be estimated from d_n/F_n", _limit_diagnostics(limit))
    q01 = model.q_up()
    diag_d = _limit_diagnostics(limit)

    if recurrent.fails or limit.infinite:
        reason = 'transient' if recurrent.fails else 'd is infinite'
        E = MomentVector(np.full(N + 1, math.inf), 'E_n sigma_0', N, [reason])
        ergodic = Verdict(Status.FAILS, {**diag_d, 'reason': reason,
                                         'recurrence': recurrent.status.value, 'truncation': N})
        strongly = Verdict(Status.FAILS, {**diag_d, 'reason': reason, 'truncation': N})
        return MeanReturnTime(limit.estimate, E, ergodic, strongly, math.inf)

    d = limit.value
    terms_mp = [F * d - dk for F, dk in zip(precise.F0, precise.d)]
    E_mp = [ctx.mpf(1) / q01 + d]
    errors = [limit.delta]
    acc, acc_F = ctx.mpf(0), ctx.mpf(0)
    for n in range(1, N + 1):
        acc += terms_mp[n - 1]
        acc_F += precise.F0[n - 1]
        E_mp.append(acc)
        errors.append(acc_F * limit.delta)
    reliable = _reliable_upto(errors, E_mp, opts.reliability_tol)
    values = np.array([to_float(x) for x in E_mp])
    E = MomentVector(values, 'E_n sigma_0', reliable)
    if reliable < N:
        E.notes.append(f"entries beyond n={reliable} carry more than {opts.reliability_tol:g} "
                       f"error from the uncertainty of d")

    diag = {**diag_d, 'd': to_float(d), 'truncation': N, 'reliable_upto': reliable}
    if recurrent.holds and limit.estimate.certified_finite:
        ergodic = Verdict(Status.HOLDS, diag)
    else:
        ergodic = Verdict(Status.INCONCLUSIVE, {**diag, 'recurrence': recurrent.status.value})

    strong_diag = dict(diag)
    strong_diag['hypothesis'] = 'uniqueness suffices for this criterion'
    terms = [to_float(t) for t in terms_mp]
    sup = float(np.max(values[1:reliable + 1])) if reliable >= 1 else None
    strong_diag['sup_partial_sums'] = sup
    if unique is not None and unique.fails:
        strongly = Verdict(Status.FAILS, {**strong_diag, 'reason': 'explosive'})
    elif not limit.estimate.certified_finite:
        strongly = Verdict(Status.INCONCLUSIVE, strong_diag)
    else:
        strongly = _strong_ergodicity(terms, values, reliable, opts, strong_diag)
    logger.info("mean return time of %s: d=%.10g, ergodic=%s, strongly ergodic=%s",
                model.name, to_float(d), ergodic.status.value, strongly.status.value)
    return MeanReturnTime(limit.estimate, E, ergodic, strongly, sup)


# -- polynomial moments ------------------------------------------------------------

@dataclass
class HittingMoment:
    i0: int
    ell: int
    E_i0: float
    E: MomentVector
    estimate: LimitEstimate
    u: List[float] = field(default_factory=list)


def hitting_moment(model: SingleBirthModel, i0: int, ell: int, N: Optional[int] = None,
                   opts: Optional[AnalysisOptions] = None, table: Optional[SequenceTable] = None,
                   precise: Optional[PreciseSequences] = None) -> HittingMoment:
    """E_n sigma_{i0}^ell by recursion over the order, starting from E sigma^0 = 1"""
    N, opts = _resolve(model, N, opts)
    if not 1 <= ell <= opts.max_moment_order:
        raise DomainError(f"moment order must lie in 1..{opts.max_moment_order}", ell=ell)
    if not 0 <= i0 < N:
        raise DomainError(f"target state must lie in 0..{N - 1}", i0=i0)
    table = table or SequenceTable(model, None, N)
    precise = precise or _precise(table, opts)
    ctx = precise.ctx

    start = max(i0 - 1, 0)
    rhs_u = [0.0] * (N + 1)
    for j in range(start, N + 1):
        rhs_u[j] = 0.0 if j == i0 else rate_to(model, j, i0)
    u = precise.solve([rhs_u], start)[0]

    previous = [ctx.mpf(1)] * (N + 1)
    reliable = N
    E_i0: Any = None
    limit: Optional[_RatioLimit] = None
    for level in range(1, ell + 1):
        v = precise.solve([previous], 0)[0]
        limit = _stolz_limit(ctx, v[i0:], u[i0:], opts, start=i0, den_offset=1)
        if limit.estimate.is_unknown:
            raise InconclusiveSeries(f"E sigma^{level} at {i0} could not be estimated",
                                     _limit_diagnostics(limit))
        if limit.infinite:
            if level < ell:
                raise PreviousOrderInfinite(level)
            values = np.full(N + 1, math.inf)
            return HittingMoment(i0, ell, math.inf,
                                 MomentVector(values, f'E_n sigma_{i0}^{ell}', N, [f"order {level} infinite"]),
                                 limit.estimate, [to_float(x) for x in u])
        E_i0 = level * limit.value
        E_mp: List[Any] = [None] * (N + 1)
        errors: List[Any] = [ctx.mpf(0)] * (N + 1)
        # states below i0
        acc_v, acc_u = ctx.mpf(0), ctx.mpf(0)
        for n in range(i0 - 1, -1, -1):
            acc_v += v[n]
            acc_u += u[n]
            E_mp[n] = level * acc_v + (1 - acc_u) * E_i0
            errors[n] = abs(1 - acc_u) * level * limit.delta
        E_mp[i0] = E_i0
        errors[i0] = level * limit.delta
        acc_v, acc_u = ctx.mpf(0), ctx.mpf(0)
        for n in range(i0 + 1, N + 1):
            acc_v += v[n - 1]
            acc_u += u[n - 1]
            E_mp[n] = -level * acc_v + (1 + acc_u) * E_i0
            errors[n] = (1 + acc_u) * level * limit.delta
        reliable = min(reliable, _reliable_upto(errors, E_mp, opts.reliability_tol))
        previous = E_mp

    values = np.array([to_float(x) for x in previous])
    E = MomentVector(values, f'E_n sigma_{i0}^{ell}', reliable)
    logger.info("hitting moment of %s: E_%d sigma_%d^%d = %.10g", model.name, i0, i0, ell, to_float(E_i0))
    return HittingMoment(i0, ell, to_float(E_i0), E, limit.estimate, [to_float(x) for x in u])


def _require_explosive(model: SingleBirthModel, N: int, opts: AnalysisOptions,
                       table: SequenceTable, unique: Optional[Verdict]) -> Verdict:
    unique = unique or uniqueness(model, N, opts, table)
    if unique.holds:
        raise NotExplosive("the process is unique (non-explosive); the life time is infinite",
                           diagnostics=unique.diagnostics)
    if unique.inconclusive:
        raise InconclusiveSeries("explosiveness is not certified", unique.diagnostics)
    return unique


def _tail_sum(terms: ScaledArray, N: int, opts: AnalysisOptions) -> Tuple[Optional[float], Conclusion]:
    window = terms[max(0, N - opts.window):]
    kummer = kummer_test(window, start=N - len(window) + 1, window=opts.window,
                         margin=opts.kummer_margin, tol=opts.ratio_tol)
    if kummer.conclusion is not Conclusion.CONVERGES:
        return None, kummer.conclusion
    tail = float(raabe_tail(window, N))
    if not math.isfinite(tail):
        return None, Conclusion.INCONCLUSIVE
    return tail, kummer.conclusion


def lifetime_moment(model: SingleBirthModel, ell: int, N: Optional[int] = None,
                    opts: Optional[AnalysisOptions] = None, table: Optional[SequenceTable] = None,
                    unique: Optional[Verdict] = None) -> MomentVector:
    """E_n tau_inf^ell = ell * sum_{k>=n} mbar_k^(ell) for an explosive process"""
    N, opts = _resolve(model, N, opts)
    if not 1 <= ell <= opts.max_moment_order:
        raise DomainError(f"moment order must lie in 1..{opts.max_moment_order}", ell=ell)
    table = table or SequenceTable(model, None, N)
    _require_explosive(model, N, opts, table, unique)

    previous = np.ones(N + 1)
    values = previous
    for level in range(1, ell + 1):
        mbar = table.m if level == 1 else table.solve(previous, 0)[0]
        tail, conclusion = _tail_sum(mbar, N, opts)
        if tail is None:
            if conclusion is Conclusion.DIVERGES:
                if level < ell:
                    raise PreviousOrderInfinite(level)
                return MomentVector(np.full(N + 1, math.inf), f'E_n tau_inf^{ell}', N)
            raise InconclusiveSeries(f"tail of the order-{level} life-time series is not certified",
                                     {'order': level, 'truncation': N})
        suffix = mbar.suffix_sums().to_floats()
        values = level * (suffix + tail)
        previous = values
    mv = MomentVector(values, f'E_n tau_inf^{ell}', N)
    logger.info("life-time moment of %s: E_0 tau^%d = %.10g", model.name, ell, values[0])
    return mv


# -- exponential moments and transforms ----------------------------------------------

@dataclass
class ExpMoment:
    feasible: Verdict
    E: MomentVector
    d_tilde: LimitEstimate


def _check_rate_bound(model: SingleBirthModel, lam: float, N: int) -> None:
    q = model.total_rates(N)
    bad = np.nonzero(q <= lam)[0]
    if len(bad):
        i = int(bad[0])
        raise RateBoundViolated(lam, i, float(q[i]))


def _tilted(model: SingleBirthModel, c: CoefficientVector, N: int,
            opts: AnalysisOptions) -> Tuple[SequenceTable, PreciseSequences]:
    table = SequenceTable(model, c, N)
    return table, _precise(table, opts)


def exp_moment_return(model: SingleBirthModel, lam: float, N: Optional[int] = None,
                      opts: Optional[AnalysisOptions] = None) -> ExpMoment:
    """E_n e^{lam sigma_0} from the sequences with c = +lam"""
    N, opts = _resolve(model, N, opts)
    if not lam > 0:
        raise DomainError("lambda must be positive", lam=lam)
    _check_rate_bound(model, lam, N)
    table, precise = _tilted(model, CoefficientVector.constant(lam), N, opts)
    ctx = precise.ctx
    F, d = precise.F0, precise.d

    if all(x > 0 for x in F[-opts.window:]):
        limit = _stolz_limit(ctx, d, F, opts, indicator=True)
    else:
        limit = _ratio_limit(ctx, _indicator_ratios(ctx, d, F), opts, 0, 'partial-sums')
    diag = {**_limit_diagnostics(limit), 'lambda': lam, 'truncation': N,
            'side_condition': 'checked over the truncation; whether it can be dropped is open'}
    if limit.estimate.is_unknown:
        raise InconclusiveSeries("d~ could not be estimated", diag)
    q01 = model.q_up()
    if limit.infinite:
        E = MomentVector(np.full(N + 1, math.inf), f'E_n exp({lam:g} sigma_0)', N, ['d~ is infinite'])
        return ExpMoment(Verdict(Status.FAILS, diag), E, limit.estimate)

    dt = limit.value
    # side condition: d~ S_F(n-1) > S_d(n-1) whenever S_F(n-1) <= 0, n >= 2
    S_F, S_d = F[0], d[0]
    for n in range(2, N + 1):
        S_F += F[n - 1]
        S_d += d[n - 1]
        if S_F <= 0 and not dt * S_F > S_d:
            raise ConditionViolated(n)

    E_mp = [q01 * (1 + lam * dt) / (q01 - lam)]
    errors = [abs(q01 * lam / (q01 - lam)) * limit.delta]
    acc, acc_F = ctx.mpf(0), ctx.mpf(0)
    for n in range(1, N + 1):
        acc += F[n - 1] * dt - d[n - 1]
        acc_F += abs(F[n - 1])
        E_mp.append(1 + lam * acc)
        errors.append(lam * acc_F * limit.delta)
    reliable = _reliable_upto(errors, E_mp, opts.reliability_tol)
    values = np.array([to_float(x) for x in E_mp])
    E = MomentVector(values, f'E_n exp({lam:g} sigma_0)', reliable)
    diag['d_tilde'] = to_float(dt)
    diag['reliable_upto'] = reliable
    status = Status.HOLDS if limit.estimate.certified_finite else Status.INCONCLUSIVE
    logger.info("exponential moment of %s at lambda=%g: d~=%.10g (%s)", model.name, lam,
                to_float(dt), status.value)
    return ExpMoment(Verdict(status, diag), E, limit.estimate)


def _indicator_ratios(ctx, d: Sequence[Any], F: Sequence[Any]) -> List[Any]:
    out: List[Any] = []
    acc_d, acc_F = ctx.mpf(0), ctx.mpf(0)
    for dk, Fk in zip(d, F):
        acc_d += dk
        acc_F += Fk
        out.append(acc_d / acc_F if acc_F > 0 else ctx.mpf(0))
    return out


def laplace_return(model: SingleBirthModel, lam: float, N: Optional[int] = None,
                   opts: Optional[AnalysisOptions] = None,
                   recurrent: Optional[Verdict] = None) -> MomentVector:
    """E_n e^{-lam sigma_0} from the sequences with c = -lam"""
    N, opts = _resolve(model, N, opts)
    if not lam > 0:
        raise DomainError("lambda must be positive", lam=lam)
    if recurrent is not None and recurrent.fails:
        raise PreconditionViolated("the Laplace transform formula needs a recurrent process",
                                   recurrence=recurrent.status.value)
    table, precise = _tilted(model, CoefficientVector.killing(lam), N, opts)
    ctx = precise.ctx
    F, d = precise.F0, precise.d
    limit = _stolz_limit(ctx, d, F, opts)
    if limit.estimate.is_unknown or limit.infinite:
        raise InconclusiveSeries("d~ could not be estimated", _limit_diagnostics(limit))
    q01 = model.q_up()
    dt = limit.value
    E_mp = [q01 * (1 - lam * dt) / (q01 + lam)]
    errors = [q01 * lam / (q01 + lam) * limit.delta]
    acc, acc_F = ctx.mpf(0), ctx.mpf(0)
    for n in range(1, N + 1):
        acc += F[n - 1] * dt - d[n - 1]
        acc_F += F[n - 1]
        E_mp.append(1 - lam * acc)
        errors.append(lam * acc_F * limit.delta)
    reliable = _reliable_upto(errors, E_mp, opts.reliability_tol)
    mv = MomentVector(np.array([to_float(x) for x in E_mp]), f'E_n exp(-{lam:g} sigma_0)', reliable)
    if not limit.estimate.certified_finite:
        mv.notes.append("d~ window did not converge; values use the window maximum")
    logger.info("Laplace transform of sigma_0 for %s at lambda=%g: E_0=%.10g",
                model.name, lam, mv[0])
    return mv


def lifetime_transforms(model: SingleBirthModel, lam: float, N: Optional[int] = None,
                        direction: str = 'laplace', opts: Optional[AnalysisOptions] = None,
                        unique: Optional[Verdict] = None) -> MomentVector:
    """E_n e^{-lam tau_inf} (direction 'laplace') or E_n e^{lam tau_inf} ('exp_moment')"""
    N, opts = _resolve(model, N, opts)
    if not lam > 0:
        raise DomainError("lambda must be positive", lam=lam)
    if direction not in ('laplace', 'exp_moment'):
        raise DomainError(f"unknown direction '{direction}' (laplace, exp_moment)")
    _require_explosive(model, N, opts, SequenceTable(model, None, N), unique)

    if direction == 'laplace':
        table = SequenceTable(model, CoefficientVector.killing(lam), N)
        tail, conclusion = _tail_sum(table.m, N, opts)
        if tail is None:
            raise InconclusiveSeries("sum of m~ is not certified finite", {'lambda': lam, 'truncation': N})
        S = table.m.exclusive_cumsum().to_floats()
        S_inf = float(table.m.total()) + tail
        values = (1.0 + lam * S) / (1.0 + lam * S_inf)
        mv = MomentVector(values, f'E_n exp(-{lam:g} tau_inf)', N)
        mv.notes.append(f"sum of m~ beyond N estimated as {tail:.6g}")
        return mv

    _check_rate_bound(model, lam, N)
    table = SequenceTable(model, CoefficientVector.constant(lam), N)
    S = table.m.cumsum().to_floats()
    scaled = lam * S
    bad = np.nonzero(scaled >= 1.0)[0]
    if len(bad):
        raise FeasibilityViolated(int(bad[0]), float(scaled[bad[0]]))
    ratios = S / (1.0 - lam * S)
    c_bar = estimate_limit(ratios, opts)
    if c_bar.is_unknown:
        raise InconclusiveSeries("c-bar could not be estimated", {'lambda': lam, 'truncation': N})
    if c_bar.is_infinite:
        return MomentVector(np.full(N + 1, math.inf), f'E_n exp({lam:g} tau_inf)', N, ['c-bar is infinite'])
    S_prev = np.concatenate([[0.0], S[:-1]])
    values = 1.0 + lam * (c_bar.value * (1.0 - lam * S_prev) - S_prev)
    mv = MomentVector(values, f'E_n exp({lam:g} tau_inf)', N)
    if not c_bar.certified_finite:
        mv.notes.append("c-bar window did not converge; values use the window maximum")
    return mv


@dataclass
class DecayProfile:
    g: np.ndarray
    first_nonpositive: Optional[int]
    scaled: ScaledArray


def decay_profile(model: SingleBirthModel, lam: float, g0: float, N: Optional[int] = None,
                  opts: Optional[AnalysisOptions] = None) -> DecayProfile:
    """g_n = g0 (1 - lam sum_{k<n} m~_k) with c = +lam, solving Qg + lam g = 0"""
    N, opts = _resolve(model, N, opts)
    if not lam > 0:
        raise DomainError("lambda must be positive", lam=lam)
    table = SequenceTable(model, CoefficientVector.constant(lam), N)
    if g0 == 0:
        return DecayProfile(np.zeros(N + 1), 0, ScaledArray.zeros(N + 1))
    unit = table.m.exclusive_cumsum() * (-lam) + 1.0
    profile = unit * g0
    g = profile.to_floats()
    g[0] = g0
    # g_n has lost the sign of g0 where the unit profile is <= 0
    nonpositive = np.nonzero(unit.sign <= 0)[0]
    first = int(nonpositive[0]) if len(nonpositive) else None
    if first is not None:
        logger.info("decay profile of %s changes sign at n=%d", model.name, first)
    return DecayProfile(g, first, profile)


# -- MZ sufficient condition ---------------------------------------------------------

@dataclass
class MZCondition:
    M: LimitEstimate
    sufficient: Verdict


def mz_sufficient_condition(model: SingleBirthModel, N: Optional[int] = None,
                            opts: Optional[AnalysisOptions] = None, table: Optional[SequenceTable] = None,
                            recurrent: Optional[Verdict] = None) -> MZCondition:
    """M = sup_n [sum_{1<=k<n} F_k] [sum_{j>=n} 1/(q_{j,j+1} F_j)] for exponential ergodicity"""
    N, opts = _resolve(model, N, opts)
    table = table or SequenceTable(model, None, N)
    recurrent = recurrent or recurrence(model, N, opts, table)
    if recurrent.fails:
        raise PreconditionViolated("the MZ condition is stated for recurrent processes",
                                   recurrence=recurrent.status.value)
    F = table.F0
    if np.any(F.sign[1:] <= 0):
        raise InconclusiveSeries("F_n^(0) vanishes; the inner series is undefined",
                                 {'first_zero': int(np.nonzero(F.sign[1:] <= 0)[0][0]) + 1})
    inner = ScaledArray(F.sign, -F.log - np.log(table.up))
    window = inner[max(0, N - opts.window):]
    kummer = kummer_test(window, start=N - len(window) + 1, window=opts.window,
                         margin=opts.kummer_margin, tol=opts.ratio_tol)
    diag: Dict[str, Any] = {'truncation': N, 'inner_kummer': kummer.to_dict(),
                            'inner_kappa': kummer.kappa.value}
    if kummer.conclusion is Conclusion.DIVERGES:
        estimate = LimitEstimate(math.inf, [], False, opts.ratio_tol, 'kummer-divergent')
        diag['certificate'] = 'inner series diverges'
        return MZCondition(estimate, Verdict(Status.FAILS, diag))
    if kummer.conclusion is not Conclusion.CONVERGES:
        raise InconclusiveSeries("convergence of the inner series is not certified", diag)

    tail = raabe_tail(window, N)
    if not math.isfinite(tail.log_magnitude):
        raise InconclusiveSeries("the tail of the inner series could not be bounded", diag)
    B = inner.suffix_sums() + _filled(tail, N + 1)
    A = F.exclusive_cumsum() - _filled(F[0], N + 1)
    products = (A * B).to_floats()[1:]
    estimate = estimate_limit(products, opts, start=1)
    window_vals = products[-opts.window:]
    diag['max_over_truncation'] = float(np.max(products))
    if estimate.is_infinite:
        return MZCondition(estimate, Verdict(Status.FAILS, {**diag, 'certificate': 'products diverge'}))
    bounded = estimate.certified_finite or bool(np.all(np.diff(window_vals) <= 0))
    M = float(np.max(products)) if estimate.value is None else max(float(np.max(products)), estimate.value)
    result = LimitEstimate(M, estimate.window_estimates, estimate.converged, estimate.tolerance,
                           estimate.certificate or ('nonincreasing-window' if bounded else None))
    diag['M'] = M
    status = Status.HOLDS if bounded else Status.INCONCLUSIVE
    return MZCondition(result, Verdict(status, diag))


# -- full analysis -----------------------------------------------------------------

# (weaker, stronger): stronger may only hold where weaker holds
_LADDER = (('unique', 'recurrent'), ('recurrent', 'ergodic'),
           ('ergodic', 'strongly_ergodic'), ('ergodic', 'exp_ergodic'))


def _apply_ladder(entries: Dict[str, ReportEntry]) -> None:
    for level, (weaker_name, stronger_name) in enumerate(_LADDER, start=1):
        stronger = entries.get(stronger_name)
        if stronger is None or stronger.verdict is None or not stronger.verdict.holds:
            continue
        weaker = entries.get(weaker_name)
        if weaker is not None and weaker.verdict is not None and weaker.verdict.holds:
            continue
        diagnostics = dict(stronger.verdict.diagnostics)
        diagnostics['downgraded_from'] = 'Holds'
        diagnostics['ladder_level'] = level
        logger.warning("%s downgraded to Inconclusive: %s does not hold", stronger_name, weaker_name)
        stronger.verdict = Verdict(Status.INCONCLUSIVE, diagnostics)
        stronger.diagnostics = diagnostics


def _verdict_entry(name: str, verdict: Verdict, value: Any = None) -> ReportEntry:
    return ReportEntry(name, verdict, value, verdict.diagnostics)


def _guarded(name: str, fn: Callable[[], List[ReportEntry]]) -> List[ReportEntry]:
    try:
        return fn()
    except NumericError as exc:
        logger.warning("%s: %s", name, exc.message)
        return [ReportEntry(name, None, None, {}, exc.to_dict())]


def analyze(model: SingleBirthModel, N: Optional[int] = None, opts: Optional[AnalysisOptions] = None,
            lam: Optional[float] = None, ell: Optional[int] = None, i0: int = 0,
            mz: bool = False, head: int = 21) -> AnalysisReport:
    """Run every criterion on one model and assemble the report"""
    N, opts = _resolve(model, N, opts)
    started = time.perf_counter()
    logger.info("analysis of %s at N=%d started", model.name, N)
    table = SequenceTable(model, None, N)
    warnings = model.irreducibility_warnings(N)
    for w in warnings:
        logger.warning("%s: %s", model.name, w)

    with ThreadPoolExecutor(max_workers=opts.threads) as pool:
        unique_f = pool.submit(uniqueness, model, N, opts, table)
        recurrent_f = pool.submit(recurrence, model, N, opts, table)
        unique, recurrent = unique_f.result(), recurrent_f.result()
        if not unique.holds:
            recurrent.diagnostics['assumption'] = f"uniqueness is {unique.status.value}"

        precise_holder: Dict[str, PreciseSequences] = {}
        precise_lock = threading.Lock()

        def shared_precise() -> PreciseSequences:
            with precise_lock:
                if 'c0' not in precise_holder:
                    precise_holder['c0'] = _precise(table, opts)
                return precise_holder['c0']

        def run_return_probability():
            mv = return_probability(model, N, opts, table, recurrent)
            return [ReportEntry('return_prob', None, mv.head(head), {'notes': mv.notes})]

        def run_mean():
            result = mean_return_time(model, N, opts, table, shared_precise(), recurrent, unique)
            d_value = result.d.value
            return [
                _verdict_entry('ergodic', result.ergodic),
                _verdict_entry('strongly_ergodic', result.strongly_ergodic, result.sup),
                ReportEntry('d', None, d_value, result.d.to_dict()),
                ReportEntry('E0_sigma0', None, result.E[0], {'reliable_upto': result.E.reliable_upto}),
                ReportEntry('E_sigma0', None, result.E.head(head), result.E.to_dict(count=0)),
            ]

        jobs: List[Tuple[str, Callable[[], List[ReportEntry]]]] = [
            ('return_prob', run_return_probability), ('mean_return_time', run_mean)]
        if lam is not None:
            def run_exp():
                result = exp_moment_return(model, lam, N, opts)
                return [_verdict_entry('exp_ergodic', result.feasible),
                        ReportEntry('exp_moment', None, result.E.head(head), result.E.to_dict(count=0))]

            def run_laplace():
                mv = laplace_return(model, lam, N, opts, recurrent)
                return [ReportEntry('laplace_return', None, mv.head(head), mv.to_dict(count=0))]

            jobs += [('exp_ergodic', run_exp), ('laplace_return', run_laplace)]
            if unique.fails:
                def run_lifetime_laplace():
                    mv = lifetime_transforms(model, lam, N, 'laplace', opts, unique)
                    return [ReportEntry('laplace_lifetime', None, mv.head(head), mv.to_dict(count=0))]
                jobs.append(('laplace_lifetime', run_lifetime_laplace))
        if ell is not None:
            def run_hitting():
                result = hitting_moment(model, i0, ell, N, opts, table, shared_precise())
                return [ReportEntry(f'hitting_moment_{ell}', None, result.E.head(head),
                                    {'i0': i0, 'E_i0': result.E_i0, **result.E.to_dict(count=0)})]
            jobs.append((f'hitting_moment_{ell}', run_hitting))
            if unique.fails:
                def run_lifetime():
                    mv = lifetime_moment(model, ell, N, opts, table, unique)
                    return [ReportEntry(f'lifetime_moment_{ell}', None, mv.head(head), mv.to_dict(count=0))]
                jobs.append((f'lifetime_moment_{ell}', run_lifetime))
        if mz:
            def run_mz():
                result = mz_sufficient_condition(model, N, opts, table, recurrent)
                return [_verdict_entry('mz_condition', result.sufficient, result.M.value)]
            jobs.append(('mz_condition', run_mz))

        futures = [pool.submit(_guarded, name, fn) for name, fn in jobs]
        produced: List[ReportEntry] = []
        for future in futures:
            produced.extend(future.result())

    entries: Dict[str, ReportEntry] = {
        'unique': _verdict_entry('unique', unique),
        'recurrent': _verdict_entry('recurrent', recurrent),
    }
    for entry in produced:
        entries[entry.name] = entry
    if 'mean_return_time' in entries:
        # the mean-return block failed as a whole
        failed = entries.pop('mean_return_time')
        for name in ('ergodic', 'strongly_ergodic', 'd'):
            entries[name] = ReportEntry(name, None, None, {}, failed.error)
    _apply_ladder(entries)

    report = AnalysisReport(
        model_echo=model.describe(),
        parameters={'N': N, 'lambda': lam, 'ell': ell, 'i0': i0, 'options': asdict(opts)},
        entries=entries,
        versions=package_versions(),
        wall_time=time.perf_counter() - started,
        warnings=warnings,
    )
    logger.info("analysis of %s finished in %.2fs", model.name, report.wall_time)
    return report
