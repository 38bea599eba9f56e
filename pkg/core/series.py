"""
Three-valued verdicts, windowed limit estimates and the Kummer test
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .config import AnalysisOptions
from .scaled import ScaledArray, ScaledReal

logger = logging.getLogger(__name__)


class Status(str, Enum):
    HOLDS = 'Holds'
    FAILS = 'Fails'
    INCONCLUSIVE = 'Inconclusive'


class Conclusion(str, Enum):
    CONVERGES = 'Converges'
    DIVERGES = 'Diverges'
    INCONCLUSIVE = 'Inconclusive'


def _is_number(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _has_indicator(diagnostics: Dict[str, Any]) -> bool:
    for value in diagnostics.values():
        if _is_number(value):
            return True
        if isinstance(value, (list, tuple)) and any(_is_number(v) for v in value):
            return True
    return False


@dataclass
class Verdict:
    status: Status
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.status = Status(self.status)
        if self.status is Status.INCONCLUSIVE and not _has_indicator(self.diagnostics):
            raise ValueError("an inconclusive verdict must carry a numeric trend indicator")

    @property
    def holds(self) -> bool:
        return self.status is Status.HOLDS

    @property
    def fails(self) -> bool:
        return self.status is Status.FAILS

    @property
    def inconclusive(self) -> bool:
        return self.status is Status.INCONCLUSIVE

    def to_dict(self) -> Dict[str, Any]:
        return {'status': self.status.value, 'diagnostics': self.diagnostics}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Verdict':
        return cls(Status(data['status']), dict(data.get('diagnostics', {})))


@dataclass
class LimitEstimate:
    """limsup of a ratio sequence estimated over the truncation tail.

    ``value`` is finite, +inf (certified divergence) or None (Unknown).
    """
    value: Optional[float]
    window_estimates: List[float]
    converged: bool
    tolerance: float
    certificate: Optional[str] = None

    @property
    def is_unknown(self) -> bool:
        return self.value is None

    @property
    def is_infinite(self) -> bool:
        return self.value is not None and math.isinf(self.value)

    @property
    def is_finite(self) -> bool:
        return self.value is not None and math.isfinite(self.value)

    @property
    def certified_finite(self) -> bool:
        return self.is_finite and (self.converged or self.certificate == 'kummer-tail')

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'LimitEstimate':
        return cls(**data)

    @classmethod
    def unknown(cls, tolerance: float, window: Sequence[float] = ()) -> 'LimitEstimate':
        return cls(None, [float(x) for x in window], False, tolerance)


@dataclass
class KummerResult:
    kappa: LimitEstimate
    conclusion: Conclusion

    @property
    def kappa_prime(self) -> Optional[float]:
        """kappa + 1, the constant compared with 1 when v_n = n"""
        return None if self.kappa.value is None else self.kappa.value + 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {'kappa': self.kappa.to_dict(), 'kappa_prime': self.kappa_prime,
                'conclusion': self.conclusion.value}


def _as_logs(u: Union[ScaledArray, Sequence[float]]) -> (np.ndarray, np.ndarray):
    if isinstance(u, ScaledArray):
        return u.log.copy(), u.sign.astype(int)
    arr = np.asarray(u, dtype=float)
    with np.errstate(divide='ignore'):
        return np.log(np.abs(arr)), np.sign(arr).astype(int)


def kummer_test(u: Union[ScaledArray, Sequence[float]], v: Optional[Sequence[float]] = None,
                start: int = 0, window: int = 50, margin: float = 0.1,
                tol: float = 1e-8) -> KummerResult:
    """kappa_n = v_n u_n / u_{n+1} - v_{n+1} over the last ``window`` indices.

    ``u`` holds u_start, u_start+1, ...; ``v`` defaults to v_n = n. Positive values
    throughout the window mean convergence, negative values divergence.
    """
    logs, signs = _as_logs(u)
    n_terms = len(logs)
    if n_terms < 3:
        return KummerResult(LimitEstimate.unknown(tol), Conclusion.INCONCLUSIVE)
    index = np.arange(start, start + n_terms, dtype=float)
    vv = index if v is None else np.asarray(v, dtype=float)
    lo = max(0, n_terms - 1 - window)
    kappas: List[float] = []
    for n in range(lo, n_terms - 1):
        if signs[n] <= 0 or signs[n + 1] <= 0:
            return KummerResult(LimitEstimate.unknown(tol, kappas), Conclusion.INCONCLUSIVE)
        ratio = math.exp(min(logs[n] - logs[n + 1], 700.0))
        kappas.append(float(vv[n] * ratio - vv[n + 1]))
    window_values = np.array(kappas)
    value = float(np.median(window_values))
    spread = float(window_values.max() - window_values.min())
    converged = spread <= tol * max(1.0, abs(value))
    estimate = LimitEstimate(value, kappas, converged, tol)
    if np.all(window_values > margin):
        conclusion = Conclusion.CONVERGES
    elif np.all(window_values < -margin):
        conclusion = Conclusion.DIVERGES
    else:
        conclusion = Conclusion.INCONCLUSIVE
    return KummerResult(estimate, conclusion)


def raabe_tail(u: Union[ScaledArray, Sequence[float]], last_index: int) -> ScaledReal:
    """Estimate of sum_{k > last} u_k from the last term ratio.

    With p = n (u_{n-1}/u_n - 1) the tail behaves like u_n n / (p - 1); this covers
    geometric decay (p ~ n(1/rho - 1)) and power laws (p ~ exponent) alike. Returns
    +inf (as a huge scaled value) when p <= 1.
    """
    logs, signs = _as_logs(u)
    if len(logs) < 2 or signs[-1] <= 0 or signs[-2] <= 0:
        return ScaledReal(1, math.inf)
    n = max(last_index, 1)
    p = n * (math.exp(min(logs[-2] - logs[-1], 700.0)) - 1.0)
    if p <= 1.0:
        return ScaledReal(1, math.inf)
    return ScaledReal(1, float(logs[-1]) + math.log(n) - math.log(p - 1.0))


def series_divergence(terms: ScaledArray, opts: AnalysisOptions, start: int = 0,
                      label: str = 'series') -> Verdict:
    """Does sum_n terms_n diverge?  Holds = diverges, Fails = converges."""
    N = start + len(terms) - 1
    partial = terms.cumsum()
    last = partial[len(partial) - 1]
    tail_sums = partial[max(0, len(partial) - 5):]
    diagnostics: Dict[str, Any] = {
        'series': label,
        'truncation': N,
        'log_partial_sum': last.log_magnitude if last.sign else None,
        'last_partial_sums': [float(x) for x in tail_sums.to_floats()],
    }
    window_terms = terms[max(0, len(terms) - opts.window - 1):]
    kummer = kummer_test(window_terms, start=N - len(window_terms) + 1, window=opts.window,
                         margin=opts.kummer_margin, tol=opts.ratio_tol)
    diagnostics['kummer'] = kummer.to_dict()
    diagnostics['kummer_kappa'] = kummer.kappa.value
    if len(window_terms) >= 2 and window_terms.sign[0] > 0 and window_terms.sign[-1] > 0:
        diagnostics['window_growth_log'] = float(window_terms.log[-1] - window_terms.log[0])

    if kummer.conclusion is Conclusion.DIVERGES:
        diagnostics['certificate'] = 'kummer'
        return Verdict(Status.HOLDS, diagnostics)
    if kummer.conclusion is Conclusion.CONVERGES:
        tail = raabe_tail(window_terms, N)
        diagnostics['tail_bound'] = float(tail) if math.isfinite(tail.log_magnitude) else math.inf
        diagnostics['certificate'] = 'kummer'
        if math.isfinite(tail.log_magnitude):
            return Verdict(Status.FAILS, diagnostics)
    nondecreasing = (len(window_terms) >= 2 and window_terms.sign[-1] > 0
                     and window_terms.sign[0] > 0 and window_terms.log[-1] >= window_terms.log[0])
    if last.sign > 0 and last.log_magnitude > math.log(opts.divergence_threshold) and nondecreasing:
        diagnostics['certificate'] = 'threshold'
        return Verdict(Status.HOLDS, diagnostics)
    diagnostics.setdefault('window_growth_log', 0.0)
    return Verdict(Status.INCONCLUSIVE, diagnostics)


def estimate_limit(values: Sequence[float], opts: AnalysisOptions, start: int = 0) -> LimitEstimate:
    """Windowed limsup of a real sequence with convergence/divergence certificates"""
    values = np.asarray(values, dtype=float)
    tol = opts.ratio_tol
    window = values[max(0, len(values) - opts.window):]
    window = window[np.isfinite(window)]
    if len(window) < 2:
        return LimitEstimate.unknown(tol, window)
    hi, lo = float(window.max()), float(window.min())
    estimates = [float(x) for x in window]
    if hi - lo <= tol * max(1.0, abs(hi)):
        return LimitEstimate(hi, estimates, True, tol, 'window')
    if hi > opts.divergence_threshold:
        return LimitEstimate(math.inf, estimates, False, tol, 'threshold')
    increments = np.diff(window)
    last_index = start + len(values) - 1
    if np.all(increments > 0):
        kummer = kummer_test(increments, start=last_index - len(increments) + 1, window=opts.window,
                             margin=opts.kummer_margin, tol=tol)
        if kummer.conclusion is Conclusion.DIVERGES:
            return LimitEstimate(math.inf, estimates, False, tol, 'kummer-divergent')
        if kummer.conclusion is Conclusion.CONVERGES:
            tail = float(raabe_tail(increments, last_index))
            if math.isfinite(tail):
                value = float(window[-1]) + tail
                return LimitEstimate(value, estimates, tail <= tol * max(1.0, abs(value)), tol,
                                     'kummer-tail')
    return LimitEstimate(hi, estimates, False, tol, None)


def ratio_floats(num: ScaledArray, den: ScaledArray) -> np.ndarray:
    """num/den entrywise as decimals (nan where den is zero)"""
    out = np.full(len(num), np.nan)
    ok = den.sign != 0
    with np.errstate(over='ignore'):
        out[ok] = (num.sign[ok] * den.sign[ok]) * np.exp(np.minimum(num.log[ok] - den.log[ok], 1e4))
    out[ok & (num.sign == 0)] = 0.0
    return out
