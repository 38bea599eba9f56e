"""
The fundamental sequences F~_n^(k), m~_n and d~_n of a single birth Q-matrix

Every sequence here is an instance of one streaming recursion

    h_n = (rhs_n + sum_{k=start}^{n-1} q~_n^(k) h_k) / q_{n,n+1},

with q~_n^(k) = sum_{j<=k} q_nj - c_n. Its solution equals
sum_j F~_n^(j) rhs_j / q_{j,j+1}, so the F~ columns (rhs = unit vector times
the up-rate), m~ (rhs = 1), d~ (rhs = 1 except rhs_0 = 0), the Poisson increments
and the moment workspaces all share the same code path.

Values are kept as sign/log pairs (``ScaledArray``). Quantities that subtract two
exponentially large, nearly equal numbers are re-evaluated in mpmath arbitrary
precision through ``PreciseSequences``.
"""
import logging
import math
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from mpmath import MPContext

from .errors import DomainError, NumericOverflow
from .model import SingleBirthModel
from .scaled import LOG_LIMIT, LOG_ZERO, ScaledArray, ScaledReal, signed_logsumexp

logger = logging.getLogger(__name__)

LN10 = math.log(10.0)


class CoefficientVector:
    """The diagonal perturbation c of Omega = Q + c (units 1/time)"""

    def __init__(self, values: Union[float, Sequence[float], Callable[[int], float]] = 0.0,
                 label: Optional[str] = None):
        self._constant: Optional[float] = None
        self._array: Optional[np.ndarray] = None
        self._fn: Optional[Callable[[int], float]] = None
        if callable(values):
            self._fn = values
        elif np.isscalar(values):
            self._constant = float(values)
            if not math.isfinite(self._constant):
                raise DomainError("c must be finite")
        else:
            self._array = np.asarray(values, dtype=float)
            if not np.all(np.isfinite(self._array)):
                raise DomainError("c must be finite")
        self.label = label or self._default_label()

    def _default_label(self) -> str:
        if self._constant is not None:
            return 'zero' if self._constant == 0 else f'constant({self._constant:g})'
        return 'custom'

    @classmethod
    def zero(cls) -> 'CoefficientVector':
        return cls(0.0, 'zero')

    @classmethod
    def constant(cls, lam: float) -> 'CoefficientVector':
        """c = +lam (exponential moments)"""
        return cls(float(lam), f'plus({lam:g})')

    @classmethod
    def killing(cls, lam: float) -> 'CoefficientVector':
        """c = -lam (uniqueness function, Laplace transforms)"""
        return cls(-float(lam), f'minus({lam:g})')

    @classmethod
    def preset(cls, name: str, lam: float = 0.0) -> 'CoefficientVector':
        if name == 'zero':
            return cls.zero()
        if name == 'plus':
            return cls.constant(lam)
        if name == 'minus':
            return cls.killing(lam)
        raise DomainError(f"unknown c preset '{name}' (zero, plus, minus)")

    @property
    def constant_value(self) -> Optional[float]:
        return self._constant

    @property
    def is_zero(self) -> bool:
        return self._constant == 0.0

    def __call__(self, i: int) -> float:
        if self._constant is not None:
            return self._constant
        if self._array is not None:
            if i >= len(self._array):
                raise IndexError(f"c is defined on 0..{len(self._array) - 1} only")
            return float(self._array[i])
        value = float(self._fn(i))
        if not math.isfinite(value):
            raise DomainError(f"c_{i} is not finite")
        return value

    def array(self, N: int) -> np.ndarray:
        if self._constant is not None:
            return np.full(N + 1, self._constant)
        return np.array([self(i) for i in range(N + 1)])

    def __repr__(self) -> str:
        return f"CoefficientVector({self.label})"


def partial_row_sums(model: SingleBirthModel, n: int) -> np.ndarray:
    """q_n^(k) = sum_{j<=k} q_nj for k = 0..n-1 (empty for n = 0)"""
    model.check_state(n)
    return np.cumsum(model.down_dense(n))


class _RowCache:
    """Per-row prefix sums and shifted prefix sums q~ in log form"""

    def __init__(self, model: SingleBirthModel, c: CoefficientVector):
        self.model = model
        self.c = c
        self._partial: Dict[int, np.ndarray] = {}
        self._tilde: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def partial(self, n: int) -> np.ndarray:
        values = self._partial.get(n)
        if values is None:
            values = partial_row_sums(self.model, n)
            self._partial[n] = values
        return values

    def tilde(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        cached = self._tilde.get(n)
        if cached is None:
            shifted = self.partial(n) - self.c(n)
            with np.errstate(divide='ignore'):
                cached = (np.log(np.abs(shifted)), np.sign(shifted).astype(np.int8))
            self._tilde[n] = cached
        return cached


def forward_solve(model: SingleBirthModel, c: CoefficientVector, N: int,
                  rhs: np.ndarray, start: int = 0,
                  cache: Optional[_RowCache] = None) -> List[ScaledArray]:
    """Solve the streaming recursion for one or more right-hand sides.

    ``rhs`` has shape (N+1,) or (R, N+1); entries before ``start`` are ignored and the
    returned arrays are zero there.
    """
    model.check_state(N)
    cache = cache or _RowCache(model, c)
    rhs = np.atleast_2d(np.asarray(rhs, dtype=float))
    if rhs.shape[1] != N + 1:
        raise ValueError(f"rhs must have N+1={N + 1} columns, got {rhs.shape[1]}")
    R = rhs.shape[0]
    logs = np.full((R, N + 1), LOG_ZERO)
    signs = np.zeros((R, N + 1), dtype=np.int8)
    with np.errstate(divide='ignore'):
        rhs_log = np.log(np.abs(rhs))
    rhs_sign = np.sign(rhs).astype(np.int8)

    for n in range(start, N + 1):
        if n > start:
            q_log, q_sign = cache.tilde(n)
            terms = q_log[start:n][None, :] + logs[:, start:n]
            term_signs = q_sign[start:n][None, :] * signs[:, start:n]
            acc_log, acc_sign = signed_logsumexp(terms, term_signs, axis=1)
        else:
            acc_log = np.full(R, LOG_ZERO)
            acc_sign = np.zeros(R, dtype=np.int8)
        tot_log, tot_sign = signed_logsumexp(np.stack([acc_log, rhs_log[:, n]], axis=1),
                                             np.stack([acc_sign, rhs_sign[:, n]], axis=1), axis=1)
        logs[:, n] = tot_log - math.log(model.up(n))
        signs[:, n] = tot_sign
        if np.any(logs[:, n][signs[:, n] != 0] > LOG_LIMIT):
            raise NumericOverflow(f"sequence magnitude leaves the scaled range at n={n}", index=n)
    return [ScaledArray(signs[r], logs[r]) for r in range(R)]


class SequenceTable:
    """F~ columns, m~ and d~ of a model for one c-vector up to the truncation N.

    Column 0 of F~ is always computed; further columns on request (``columns='all'``
    builds the full triangle, which costs O(N^3) and is meant for small N).
    """

    def __init__(self, model: SingleBirthModel, c: Optional[CoefficientVector] = None,
                 N: int = 1000, columns: Union[str, Iterable[int]] = (0,)):
        model.check_state(N)
        self.model = model
        self.c = c or CoefficientVector.zero()
        self.N = N
        self.up = model.up_rates(N)
        self._cache = _RowCache(model, self.c)
        self._columns: Dict[int, ScaledArray] = {}

        rhs = np.zeros((3, N + 1))
        rhs[0, 0] = self.up[0]
        rhs[1, :] = 1.0
        rhs[2, 1:] = 1.0
        F0, self.m, self.d = forward_solve(model, self.c, N, rhs, 0, self._cache)
        self._columns[0] = F0
        wanted = range(N + 1) if columns == 'all' else columns
        for i in wanted:
            self.column(i)
        logger.debug("sequence table for %s, c=%s, N=%d: max log F0=%.4g",
                     model.name, self.c.label, N, F0.max_log())

    @property
    def F0(self) -> ScaledArray:
        return self._columns[0]

    def q_partial(self, n: int) -> np.ndarray:
        return self._cache.partial(n)

    def q_tilde(self, n: int) -> np.ndarray:
        """q~_n^(k) for k < n as decimals"""
        return self._cache.partial(n) - self.c(n)

    def column(self, i: int) -> ScaledArray:
        """F~_n^(i) for n = 0..N (zero for n < i)"""
        col = self._columns.get(i)
        if col is None:
            if not 0 <= i <= self.N:
                raise IndexError(f"column {i} outside 0..{self.N}")
            rhs = np.zeros(self.N + 1)
            rhs[i] = self.up[i]
            col = forward_solve(self.model, self.c, self.N, rhs, i, self._cache)[0]
            self._columns[i] = col
        return col

    def F(self, n: int, k: int) -> ScaledReal:
        return self.column(k)[n]

    def solve(self, rhs: np.ndarray, start: int = 0) -> List[ScaledArray]:
        """Streaming recursion for arbitrary right-hand sides, sharing this table's row cache"""
        return forward_solve(self.model, self.c, self.N, rhs, start, self._cache)

    def dual_column(self, i: int) -> ScaledArray:
        """F~_n^(i) rebuilt from the later columns: sum_{k=i+1}^n F~_n^(k) q~_k^(i) / q_{k,k+1}"""
        N = self.N
        out_sign = np.zeros(N + 1, dtype=np.int8)
        out_log = np.full(N + 1, LOG_ZERO)
        out_sign[i], out_log[i] = 1, 0.0
        weights = np.array([self.q_tilde(k)[i] / self.up[k] if k > i else 0.0 for k in range(N + 1)])
        w = ScaledArray.from_floats(weights)
        for n in range(i + 1, N + 1):
            logs = np.array([self.column(k).log[n] for k in range(i + 1, n + 1)]) + w.log[i + 1:n + 1]
            signs = np.array([self.column(k).sign[n] for k in range(i + 1, n + 1)]) * w.sign[i + 1:n + 1]
            out_log[n], out_sign[n] = signed_logsumexp(logs, signs)
        return ScaledArray(out_sign, out_log)

    def identity_error(self) -> float:
        """max relative deviation of m~_n from F~_n^(0)/q01 + d~_n"""
        rebuilt = self.F0 / self.up[0] + self.d
        diff = self.m - rebuilt
        nz = self.m.sign != 0
        rel = np.where(nz & (diff.sign != 0), np.exp(np.minimum(diff.log - self.m.log, 0.0)), 0.0)
        if np.any(~nz & (rebuilt.sign != 0)):
            return math.inf
        return float(rel.max()) if len(rel) else 0.0

    def magnitude_span(self) -> float:
        """Largest |log| among the nonzero entries of F~_0, m~ and d~"""
        span = 0.0
        for arr in (self.F0, self.m, self.d):
            nz = arr.sign != 0
            if nz.any():
                span = max(span, float(np.abs(arr.log[nz]).max()))
        return span

    def precise(self, extra_digits: int = 30, max_digits: int = 6000) -> 'PreciseSequences':
        return PreciseSequences(self.model, self.c, self.N,
                                required_digits(self.magnitude_span(), extra_digits, max_digits))

    def to_frame(self) -> pd.DataFrame:
        """n, then sign/log/decimal triples for F~^(0), m~, d~"""
        frame = pd.DataFrame({'n': np.arange(self.N + 1)})
        for name, arr in (('F0', self.F0), ('m', self.m), ('d', self.d)):
            decimals = arr.to_floats()
            decimals[~arr.representable] = np.nan
            frame[f'{name}_sign'] = arr.sign.astype(int)
            frame[f'{name}_log'] = arr.log
            frame[name] = decimals
        return frame


def f_table(model: SingleBirthModel, c: Optional[CoefficientVector], N: int,
            columns: Union[str, Iterable[int]] = (0,)) -> SequenceTable:
    return SequenceTable(model, c, N, columns)


def m_sequence(model: SingleBirthModel, c: Optional[CoefficientVector], N: int) -> ScaledArray:
    return SequenceTable(model, c, N).m


def d_sequence(model: SingleBirthModel, c: Optional[CoefficientVector], N: int) -> ScaledArray:
    return SequenceTable(model, c, N).d


def required_digits(log_span: float, extra_digits: int = 30, max_digits: int = 6000) -> int:
    digits = extra_digits + int(math.ceil(log_span / LN10))
    if digits > max_digits:
        logger.warning("working precision capped at %d digits (%d wanted)", max_digits, digits)
        digits = max_digits
    return digits


def forward_solve_precise(ctx: MPContext, model: SingleBirthModel, c: CoefficientVector, N: int,
                          rhs_rows: Sequence[Sequence], start: int = 0) -> List[list]:
    """Arbitrary-precision twin of ``forward_solve``.

    The inner sum is regrouped over runs of equal down-rates using
    H_a = sum_{start<=k<a} h_k and HH_a = sum_{start<=b<a} H_b:

        sum_k q~_n^(k) h_k = sum_j q_nj (H_n - H_max(j,start)) - c_n H_n,

    so each row costs O(number of runs) instead of O(n).
    """
    model.check_state(N)
    up = [ctx.mpf(model.up(n)) for n in range(N + 1)]
    cvals = [ctx.mpf(x) for x in c.array(N)]
    zero = ctx.mpf(0)
    out = []
    for rhs in rhs_rows:
        rhs = [ctx.mpf(x) for x in rhs]
        h = [zero] * (N + 1)
        H = [zero] * (N + 2)
        HH = [zero] * (N + 2)
        for n in range(start, N + 1):
            Hn = H[n]
            acc = -cvals[n] * Hn
            for s, e, rate in model.down_runs(n):
                below = min(e, start) - s
                if below > 0:
                    acc += rate * below * Hn
                lo = max(s, start)
                if e > lo:
                    acc += rate * ((e - lo) * Hn - (HH[e] - HH[lo]))
            value = (rhs[n] + acc) / up[n]
            h[n] = value
            H[n + 1] = Hn + value
            HH[n + 1] = HH[n] + Hn
        out.append(h)
    return out


class PreciseSequences:
    """F~^(0), d~ and m~ in mpmath arbitrary precision"""

    def __init__(self, model: SingleBirthModel, c: CoefficientVector, N: int, digits: int):
        self.model = model
        self.c = c
        self.N = N
        self.digits = digits
        self.ctx = MPContext()
        self.ctx.dps = digits
        rhs_F = [0.0] * (N + 1)
        rhs_F[0] = model.up(0)
        rhs_d = [0.0] + [1.0] * N
        self.F0, self.d = forward_solve_precise(self.ctx, model, c, N, [rhs_F, rhs_d])
        q01 = self.ctx.mpf(model.up(0))
        self.m = [f / q01 + d for f, d in zip(self.F0, self.d)]
        logger.debug("precise sequences for %s at %d digits", model.name, digits)

    def solve(self, rhs_rows: Sequence[Sequence], start: int = 0) -> List[list]:
        return forward_solve_precise(self.ctx, self.model, self.c, self.N, rhs_rows, start)

    def mpf(self, x):
        return self.ctx.mpf(x)

    @staticmethod
    def to_float(x) -> float:
        try:
            return float(x)
        except OverflowError:
            return math.copysign(math.inf, x)
