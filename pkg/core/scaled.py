"""
Sign/log-magnitude arithmetic for sequences that outgrow double precision
"""
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .errors import NumericOverflow

LOG_ZERO = float('-inf')
LOG_LIMIT = 1e6
FLOAT_LOG_MAX = 709.0

Number = Union[int, float]


def _signed_add(log_a: float, sign_a: int, log_b: float, sign_b: int) -> Tuple[float, int]:
    if sign_a == 0:
        return log_b, sign_b
    if sign_b == 0:
        return log_a, sign_a
    if log_a < log_b:
        log_a, sign_a, log_b, sign_b = log_b, sign_b, log_a, sign_a
    delta = log_b - log_a
    if sign_a == sign_b:
        return log_a + math.log1p(math.exp(delta)), sign_a
    if delta == 0.0:
        return LOG_ZERO, 0
    return log_a + math.log1p(-math.exp(delta)), sign_a


def signed_logsumexp(logs: np.ndarray, signs: np.ndarray, axis=None) -> Tuple[np.ndarray, np.ndarray]:
    """log|sum| and sign of sum(sign * exp(log)) along axis"""
    logs = np.asarray(logs, dtype=float)
    signs = np.asarray(signs, dtype=float)
    if logs.size == 0 or (axis is not None and logs.shape[axis] == 0):
        shape = () if axis is None else tuple(np.delete(np.array(logs.shape), axis))
        return np.full(shape, LOG_ZERO), np.zeros(shape, dtype=np.int8)
    logs = np.where(signs == 0, LOG_ZERO, logs)
    with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
        out, sgn = logsumexp(logs, axis=axis, b=signs, return_sign=True)
    out = np.asarray(out, dtype=float)
    sgn = np.where(np.isneginf(out) | np.isnan(out), 0, np.asarray(sgn)).astype(np.int8)
    out = np.where(sgn == 0, LOG_ZERO, out)
    return out, sgn


def check_range(log_magnitude: float, where: str = '') -> None:
    if log_magnitude > LOG_LIMIT:
        raise NumericOverflow(f"log magnitude {log_magnitude:.3g} exceeds the scaled range"
                              + (f" ({where})" if where else ''))


@dataclass(frozen=True)
class ScaledReal:
    """A real number stored as sign and natural log of its magnitude"""
    sign: int
    log_magnitude: float

    @classmethod
    def zero(cls) -> 'ScaledReal':
        return cls(0, LOG_ZERO)

    @classmethod
    def one(cls) -> 'ScaledReal':
        return cls(1, 0.0)

    @classmethod
    def from_float(cls, x: Number) -> 'ScaledReal':
        if x == 0:
            return cls.zero()
        if not math.isfinite(x):
            raise NumericOverflow(f"cannot scale non-finite value {x}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def coerce(cls, x: Union['ScaledReal', Number]) -> 'ScaledReal':
        return x if isinstance(x, ScaledReal) else cls.from_float(x)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    @property
    def representable(self) -> bool:
        return self.sign == 0 or self.log_magnitude < FLOAT_LOG_MAX

    def log10(self) -> float:
        return self.log_magnitude / math.log(10.0)

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_magnitude >= FLOAT_LOG_MAX:
            return math.copysign(math.inf, self.sign)
        return self.sign * math.exp(self.log_magnitude)

    def __neg__(self) -> 'ScaledReal':
        return ScaledReal(-self.sign, self.log_magnitude)

    def __abs__(self) -> 'ScaledReal':
        return ScaledReal(abs(self.sign), self.log_magnitude)

    def __add__(self, other) -> 'ScaledReal':
        other = ScaledReal.coerce(other)
        log_m, sign = _signed_add(self.log_magnitude, self.sign, other.log_magnitude, other.sign)
        return ScaledReal(sign, log_m)

    __radd__ = __add__

    def __sub__(self, other) -> 'ScaledReal':
        return self + (-ScaledReal.coerce(other))

    def __rsub__(self, other) -> 'ScaledReal':
        return ScaledReal.coerce(other) - self

    def __mul__(self, other) -> 'ScaledReal':
        other = ScaledReal.coerce(other)
        if self.sign == 0 or other.sign == 0:
            return ScaledReal.zero()
        log_m = self.log_magnitude + other.log_magnitude
        check_range(log_m, 'product')
        return ScaledReal(self.sign * other.sign, log_m)

    __rmul__ = __mul__

    def __truediv__(self, other) -> 'ScaledReal':
        other = ScaledReal.coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("division of a scaled real by zero")
        if self.sign == 0:
            return ScaledReal.zero()
        log_m = self.log_magnitude - other.log_magnitude
        check_range(log_m, 'quotient')
        return ScaledReal(self.sign * other.sign, log_m)

    def __rtruediv__(self, other) -> 'ScaledReal':
        return ScaledReal.coerce(other) / self

    def __lt__(self, other) -> bool:
        return (self - ScaledReal.coerce(other)).sign < 0

    def __le__(self, other) -> bool:
        return (self - ScaledReal.coerce(other)).sign <= 0

    def __gt__(self, other) -> bool:
        return (self - ScaledReal.coerce(other)).sign > 0

    def __ge__(self, other) -> bool:
        return (self - ScaledReal.coerce(other)).sign >= 0

    def as_pair(self) -> Tuple[int, float]:
        return self.sign, self.log_magnitude

    def __repr__(self) -> str:
        if self.sign == 0:
            return 'ScaledReal(0)'
        if self.representable:
            return f'ScaledReal({float(self):.12g})'
        sign = '-' if self.sign < 0 else ''
        return f'ScaledReal({sign}exp({self.log_magnitude:.12g}))'


class ScaledArray:
    """Vector of scaled reals held as parallel sign and log arrays"""

    __slots__ = ('sign', 'log')

    def __init__(self, sign: Iterable[int], log: Iterable[float]):
        self.sign = np.asarray(sign, dtype=np.int8).copy()
        self.log = np.asarray(log, dtype=float).copy()
        if self.sign.shape != self.log.shape:
            raise ValueError("sign and log arrays must have the same shape")
        self.log[self.sign == 0] = LOG_ZERO

    @classmethod
    def zeros(cls, n: int) -> 'ScaledArray':
        return cls(np.zeros(n, dtype=np.int8), np.full(n, LOG_ZERO))

    @classmethod
    def from_floats(cls, values: Sequence[float]) -> 'ScaledArray':
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise NumericOverflow("cannot scale non-finite values")
        with np.errstate(divide='ignore'):
            logs = np.log(np.abs(values))
        return cls(np.sign(values).astype(np.int8), logs)

    @classmethod
    def from_scaled(cls, items: Sequence[ScaledReal]) -> 'ScaledArray':
        return cls([x.sign for x in items], [x.log_magnitude for x in items])

    def __len__(self) -> int:
        return len(self.sign)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return ScaledReal(int(self.sign[idx]), float(self.log[idx]))
        return ScaledArray(self.sign[idx], self.log[idx])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def copy(self) -> 'ScaledArray':
        return ScaledArray(self.sign, self.log)

    @property
    def representable(self) -> np.ndarray:
        return (self.sign == 0) | (self.log < FLOAT_LOG_MAX)

    def to_floats(self) -> np.ndarray:
        """Decimal values; magnitudes beyond double range become +/-inf"""
        with np.errstate(over='ignore'):
            values = self.sign * np.exp(np.minimum(self.log, 1e4))
        values[self.sign == 0] = 0.0
        return values

    def max_log(self) -> float:
        nz = self.sign != 0
        return float(self.log[nz].max()) if nz.any() else LOG_ZERO

    def min_log(self) -> float:
        nz = self.sign != 0
        return float(self.log[nz].min()) if nz.any() else LOG_ZERO

    def __neg__(self) -> 'ScaledArray':
        return ScaledArray(-self.sign, self.log)

    def __mul__(self, other) -> 'ScaledArray':
        if isinstance(other, ScaledArray):
            sign, log = other.sign, other.log
        elif isinstance(other, ScaledReal):
            sign, log = other.sign, other.log_magnitude
        else:
            arr = ScaledArray.from_floats(np.broadcast_to(np.asarray(other, dtype=float), self.sign.shape))
            sign, log = arr.sign, arr.log
        out_sign = self.sign * np.asarray(sign, dtype=np.int8)
        out_log = self.log + log
        out = ScaledArray(out_sign, out_log)
        if len(out) and out.max_log() > LOG_LIMIT:
            raise NumericOverflow("scaled product out of range")
        return out

    __rmul__ = __mul__

    def __truediv__(self, other) -> 'ScaledArray':
        if isinstance(other, ScaledArray):
            if np.any(other.sign == 0):
                raise ZeroDivisionError("division by a zero entry")
            return ScaledArray(self.sign * other.sign, self.log - other.log)
        if isinstance(other, ScaledReal):
            if other.sign == 0:
                raise ZeroDivisionError("division by zero")
            return ScaledArray(self.sign * other.sign, self.log - other.log_magnitude)
        other = np.broadcast_to(np.asarray(other, dtype=float), self.sign.shape)
        return self / ScaledArray.from_floats(other)

    def __add__(self, other) -> 'ScaledArray':
        other = other if isinstance(other, ScaledArray) else ScaledArray.from_floats(
            np.broadcast_to(np.asarray(other, dtype=float), self.sign.shape))
        logs = np.stack([self.log, other.log])
        signs = np.stack([self.sign, other.sign])
        out_log, out_sign = signed_logsumexp(logs, signs, axis=0)
        return ScaledArray(out_sign, out_log)

    def __sub__(self, other) -> 'ScaledArray':
        other = other if isinstance(other, ScaledArray) else ScaledArray.from_floats(
            np.broadcast_to(np.asarray(other, dtype=float), self.sign.shape))
        return self + (-other)

    def total(self) -> ScaledReal:
        out_log, out_sign = signed_logsumexp(self.log, self.sign)
        return ScaledReal(int(out_sign), float(out_log))

    def cumsum(self) -> 'ScaledArray':
        """Running sums S_n = x_0 + ... + x_n"""
        n = len(self)
        if n == 0:
            return self.copy()
        if np.all(self.sign >= 0):
            with np.errstate(invalid='ignore'):
                logs = np.logaddexp.accumulate(self.log)
            signs = np.where(np.isneginf(logs), 0, 1)
            return ScaledArray(signs, logs)
        out_sign = np.zeros(n, dtype=np.int8)
        out_log = np.full(n, LOG_ZERO)
        acc_log, acc_sign = LOG_ZERO, 0
        for k in range(n):
            acc_log, acc_sign = _signed_add(acc_log, acc_sign, float(self.log[k]), int(self.sign[k]))
            out_sign[k], out_log[k] = acc_sign, acc_log
        return ScaledArray(out_sign, out_log)

    def exclusive_cumsum(self) -> 'ScaledArray':
        """Sums over k < n: entry n holds x_0 + ... + x_{n-1}"""
        running = self.cumsum()
        return ScaledArray(np.concatenate([[0], running.sign[:-1]]),
                           np.concatenate([[LOG_ZERO], running.log[:-1]]))

    def suffix_sums(self) -> 'ScaledArray':
        """Tail sums T_n = x_n + ... + x_last"""
        rev = ScaledArray(self.sign[::-1], self.log[::-1]).cumsum()
        return ScaledArray(rev.sign[::-1], rev.log[::-1])

    def __repr__(self) -> str:
        return f'ScaledArray(len={len(self)}, max_log={self.max_log():.4g})'
