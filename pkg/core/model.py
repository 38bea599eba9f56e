"""
Single birth Q-matrices (tabulated or generated), finite single death matrices, and model builders
"""
import logging
import math
import threading
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DomainError, HorizonExceeded, StructureError
from .expressions import compile_expression

logger = logging.getLogger(__name__)

RateSpec = Union[float, int, str, Callable[[int], float]]


class RateRow:
    """Row i of a single birth Q-matrix: one up-rate and sparse down-rates to j < i"""

    __slots__ = ('up', 'targets', 'rates')

    def __init__(self, up: float, down: Optional[Mapping[int, float]] = None):
        self.up = float(up)
        items = sorted((int(j), float(r)) for j, r in (down or {}).items())
        self.targets = np.array([j for j, r in items if r != 0.0], dtype=np.int64)
        self.rates = np.array([r for j, r in items if r != 0.0], dtype=float)
        for j, r in items:
            if not math.isfinite(r) or r < 0:
                raise StructureError(f"down rate to {j} must be finite and nonnegative, got {r}")

    @property
    def down(self) -> Dict[int, float]:
        return {int(j): float(r) for j, r in zip(self.targets, self.rates)}

    @property
    def down_total(self) -> float:
        return float(self.rates.sum()) if len(self.rates) else 0.0

    @property
    def total(self) -> float:
        """q_i, the total jump rate out of the row's state"""
        return self.up + self.down_total

    def validate(self, i: int) -> 'RateRow':
        if not math.isfinite(self.up) or self.up <= 0:
            raise StructureError(f"row {i}: up-rate q_{{{i},{i + 1}}} must be positive and finite, got {self.up}",
                                 row=i)
        if len(self.targets):
            if self.targets.min() < 0:
                raise StructureError(f"row {i}: negative target state", row=i)
            bad = self.targets[self.targets >= i]
            if len(bad):
                raise StructureError(f"row {i}: rate at j={int(bad[0])} breaks the single birth shape "
                                     f"(only j < {i} and the up-rate are allowed)", row=i, target=int(bad[0]))
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {'up': self.up, 'down': {str(j): r for j, r in self.down.items()}}

    def __eq__(self, other) -> bool:
        if not isinstance(other, RateRow):
            return NotImplemented
        return (self.up == other.up and np.array_equal(self.targets, other.targets)
                and np.array_equal(self.rates, other.rates))

    def __repr__(self) -> str:
        return f"RateRow(up={self.up!r}, down={self.down!r})"


def _as_row(value: Any) -> RateRow:
    if isinstance(value, RateRow):
        return value
    if isinstance(value, Mapping):
        extra = set(value) - {'up', 'down'}
        if extra:
            raise StructureError(f"unknown row keys: {', '.join(sorted(map(str, extra)))}")
        if 'up' not in value:
            raise StructureError("row is missing its up-rate")
        return RateRow(value['up'], {int(j): r for j, r in (value.get('down') or {}).items()})
    if isinstance(value, tuple) and len(value) == 2:
        return RateRow(value[0], value[1])
    raise StructureError(f"cannot interpret {value!r} as a rate row")


class SingleBirthModel:
    """Conservative single birth Q-matrix on the states 0, 1, 2, ...

    Either tabulated (a finite list of rows, horizon = number of rows) or generated
    from a rate function (optionally with a declared horizon). Generated rows are
    validated and memoized on first access; the memo is guarded by a lock so a model
    can be shared by concurrent analyses.
    """

    def __init__(self, rows: Optional[Sequence[Any]] = None,
                 rate_function: Optional[Callable[[int], Any]] = None,
                 declared_horizon: Optional[int] = None,
                 name: str = 'model', spec: Optional[Dict[str, Any]] = None):
        if (rows is None) == (rate_function is None):
            raise StructureError("a model needs exactly one of rows or rate_function")
        self.name = name
        self.spec = dict(spec) if spec else None
        self.state_offset = 0
        self._lock = threading.Lock()
        self._rows: Dict[int, RateRow] = {}
        self._runs: Dict[int, List[Tuple[int, int, float]]] = {}
        self._rate_function = rate_function
        if rows is not None:
            if len(rows) == 0:
                raise StructureError("a tabulated model needs at least one row")
            for i, raw in enumerate(rows):
                self._rows[i] = _as_row(raw).validate(i)
            self.kind = 'tabulated'
            self.horizon: Optional[int] = len(rows)
        else:
            self.kind = 'generated'
            if declared_horizon is not None and declared_horizon < 1:
                raise StructureError("declared horizon must be positive")
            self.horizon = declared_horizon

    # -- row access -------------------------------------------------------

    def check_state(self, n: int) -> None:
        if n < 0:
            raise HorizonExceeded(n, self.horizon or 0)
        if self.horizon is not None and n >= self.horizon:
            raise HorizonExceeded(n, self.horizon)

    def row(self, i: int) -> RateRow:
        row = self._rows.get(i)
        if row is not None:
            return row
        self.check_state(i)
        with self._lock:
            row = self._rows.get(i)
            if row is None:
                row = _as_row(self._rate_function(i)).validate(i)
                self._rows[i] = row
        return row

    def up(self, i: int) -> float:
        return self.row(i).up

    def total_rate(self, i: int) -> float:
        return self.row(i).total

    def up_rates(self, N: int) -> np.ndarray:
        return np.array([self.row(i).up for i in range(N + 1)])

    def total_rates(self, N: int) -> np.ndarray:
        return np.array([self.row(i).total for i in range(N + 1)])

    def down_dense(self, i: int) -> np.ndarray:
        """q_{ij} for j = 0..i-1 as a dense vector"""
        row = self.row(i)
        dense = np.zeros(i)
        if len(row.targets):
            dense[row.targets] = row.rates
        return dense

    def down_runs(self, i: int) -> List[Tuple[int, int, float]]:
        """Maximal runs [start, end) of equal positive down-rates in row i"""
        runs = self._runs.get(i)
        if runs is not None:
            return runs
        row = self.row(i)
        runs = []
        for j, r in zip(row.targets.tolist(), row.rates.tolist()):
            if runs and runs[-1][1] == j and runs[-1][2] == r:
                runs[-1] = (runs[-1][0], j + 1, r)
            else:
                runs.append((j, j + 1, r))
        with self._lock:
            self._runs[i] = runs
        return runs

    def q_up(self) -> float:
        """q_{01}"""
        return self.up(0)

    # -- derived models and checks ------------------------------------------

    def tabulate(self, N: int) -> 'SingleBirthModel':
        """Tabulated copy holding rows 0..N"""
        self.check_state(N)
        rows = [self.row(i) for i in range(N + 1)]
        return SingleBirthModel(rows=rows, name=self.name, spec=self.spec)

    def irreducibility_warnings(self, N: int) -> List[str]:
        """States up to N whose way back to 0 cannot be confirmed from rows 0..N"""
        N = N if self.horizon is None else min(N, self.horizon - 1)
        warnings: List[str] = []
        if N >= 1 and all(len(self.row(i).targets) == 0 for i in range(1, N + 1)):
            warnings.append("non-irreducible-down: no state i >= 1 has any down-rate")
            return warnings
        reaches = [False] * (N + 1)
        reaches[0] = True
        for i in range(1, N + 1):
            reaches[i] = any(reaches[j] for j in self.row(i).targets.tolist())
        # a state also reaches 0 by first climbing to one that does
        for i in range(N - 1, 0, -1):
            reaches[i] = reaches[i] or reaches[i + 1]
        stuck = [i for i in range(N + 1) if not reaches[i]]
        if stuck:
            warnings.append(f"states {stuck[0]}..{stuck[-1]} have no confirmed path back to 0 "
                            f"within the first {N} rows")
        if self.kind == 'generated':
            warnings.append("irreducibility beyond the inspected rows is an unchecked hypothesis")
        return warnings

    def describe(self) -> Dict[str, Any]:
        """Normalized echo of the model definition"""
        if self.spec is not None:
            return dict(self.spec)
        if self.kind == 'tabulated':
            return {'kind': 'tabulated', 'name': self.name,
                    'rows': [self._rows[i].to_dict() for i in range(self.horizon)]}
        return {'kind': 'generated', 'name': self.name, 'declared_horizon': self.horizon}

    def __repr__(self) -> str:
        return f"SingleBirthModel(name={self.name!r}, kind={self.kind}, horizon={self.horizon})"


def build_tabulated(rows: Sequence[Any], name: str = 'tabulated') -> SingleBirthModel:
    """Validated model from explicit rows; horizon is the number of rows"""
    if not rows:
        raise StructureError("rows must be non-empty")
    model = SingleBirthModel(rows=rows, name=name)
    model.spec = {'kind': 'tabulated', 'name': name,
                  'rows': [model.row(i).to_dict() for i in range(len(rows))]}
    return model


def rate_function(value: RateSpec, label: str) -> Callable[[int], float]:
    """Constant, expression string or callable as a function of the state"""
    if callable(value):
        return value
    if isinstance(value, str):
        return compile_expression(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DomainError(f"{label} must be a number, an expression in i, or a function")
    constant = float(value)
    return lambda i: constant


def _positive(value: float, label: str, i: int) -> float:
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{label} must be positive, got {value} at i={i}", state=i)
    return value


def _rate_echo(value: RateSpec) -> Any:
    if isinstance(value, (int, float, str)):
        return value
    return getattr(value, 'source', repr(value))


def model_uniform_catastrophe(a: float, b: float, q01: float,
                              horizon: Optional[int] = None) -> SingleBirthModel:
    """q_{i,i+1} = b*i (i >= 1), q_{01} = q01, q_{ij} = a for every j < i"""
    for label, value in (('a', a), ('b', b), ('q01', q01)):
        _positive(float(value), label, 0)
    a, b, q01 = float(a), float(b), float(q01)

    def rates(i: int) -> RateRow:
        if i == 0:
            return RateRow(q01)
        return RateRow(b * i, {j: a for j in range(i)})

    spec = {'kind': 'uniform_catastrophe', 'a': a, 'b': b, 'q01': q01}
    return SingleBirthModel(rate_function=rates, declared_horizon=horizon,
                            name=f'uniform_catastrophe(a={a:g},b={b:g},q01={q01:g})', spec=spec)


def model_constant_column(q_i0: RateSpec, up: RateSpec,
                          horizon: Optional[int] = None) -> SingleBirthModel:
    """Only a return-to-0 rate q_{i0} and an up-rate per row"""
    back = rate_function(q_i0, 'q_i0')
    birth = rate_function(up, 'up')

    def rates(i: int) -> RateRow:
        u = _positive(birth(i), 'up', i)
        if i == 0:
            return RateRow(u)
        return RateRow(u, {0: _positive(back(i), 'q_i0', i)})

    rates(0)
    rates(1)
    spec = {'kind': 'constant_column', 'q_i0': _rate_echo(q_i0), 'up': _rate_echo(up)}
    return SingleBirthModel(rate_function=rates, declared_horizon=horizon,
                            name='constant_column', spec=spec)


def model_birth_death(up: RateSpec, down: RateSpec,
                      horizon: Optional[int] = None) -> SingleBirthModel:
    """Rows with a single down-rate to i-1"""
    birth = rate_function(up, 'up')
    death = rate_function(down, 'down')

    def rates(i: int) -> RateRow:
        u = _positive(birth(i), 'up', i)
        if i == 0:
            return RateRow(u)
        return RateRow(u, {i - 1: _positive(death(i), 'down', i)})

    rates(0)
    rates(1)
    spec = {'kind': 'birth_death', 'up': _rate_echo(up), 'down': _rate_echo(down)}
    return SingleBirthModel(rate_function=rates, declared_horizon=horizon,
                            name='birth_death', spec=spec)


def model_expression(up: str, down: Mapping[str, str],
                     horizon: Optional[int] = None) -> SingleBirthModel:
    """Rates given as expressions in i.

    Keys of ``down`` name the target: ``"0"`` (or any fixed integer j, used for i > j),
    ``"i-1"`` (the predecessor) or ``"all"`` (every j < i).
    """
    birth = compile_expression(up)
    targets: List[Tuple[str, Callable[[int], float]]] = []
    for key, expr in down.items():
        key = str(key).replace(' ', '')
        if key not in ('i-1', 'all') and not key.isdigit():
            raise DomainError(f"down target '{key}' must be an integer, 'i-1' or 'all'")
        targets.append((key, compile_expression(expr)))

    def rates(i: int) -> RateRow:
        row: Dict[int, float] = {}
        for key, fn in targets:
            if key == 'all':
                js = range(i)
            elif key == 'i-1':
                js = [i - 1] if i >= 1 else []
            else:
                js = [int(key)] if int(key) < i else []
            for j in js:
                value = fn(i)
                if not math.isfinite(value) or value < 0:
                    raise DomainError(f"down rate '{key}' must be nonnegative, got {value} at i={i}", state=i)
                row[j] = row.get(j, 0.0) + value
        return RateRow(birth(i), row)

    spec = {'kind': 'expression', 'up': birth.source,
            'down': {key: fn.source for key, fn in targets}}
    return SingleBirthModel(rate_function=rates, declared_horizon=horizon,
                            name='expression', spec=spec)


class SingleDeathModel:
    """Finite single death Q-matrix on {0..N} together with its c-vector"""

    def __init__(self, down: Sequence[float], up: Sequence[Mapping[int, float]],
                 c: Optional[Sequence[float]] = None):
        self.N = len(down) - 1
        if self.N < 1:
            raise StructureError("a single death model needs at least two states")
        if len(up) != self.N + 1:
            raise StructureError("up-rate table must have one entry per state")
        self.down = np.asarray(down, dtype=float)
        self.down[0] = 0.0
        self.up: List[Dict[int, float]] = []
        for i, entries in enumerate(up):
            clean: Dict[int, float] = {}
            for j, r in (entries or {}).items():
                j, r = int(j), float(r)
                if j <= i or j > self.N:
                    raise StructureError(f"row {i}: up-rate target {j} must lie in ({i}, {self.N}]", row=i)
                if not math.isfinite(r) or r < 0:
                    raise StructureError(f"row {i}: rates must be finite and nonnegative", row=i)
                if r > 0:
                    clean[j] = r
            self.up.append(clean)
        for i in range(1, self.N + 1):
            if not math.isfinite(self.down[i]) or self.down[i] <= 0:
                raise StructureError(f"row {i}: q_{{{i},{i - 1}}} must be positive", row=i)
        self.c = np.zeros(self.N + 1) if c is None else np.asarray(c, dtype=float)
        if self.c.shape != (self.N + 1,) or not np.all(np.isfinite(self.c)):
            raise StructureError("c must be a finite vector with one entry per state")

    def rate_matrix(self) -> np.ndarray:
        """Dense conservative Q (without c)"""
        Q = np.zeros((self.N + 1, self.N + 1))
        for i in range(self.N + 1):
            if i >= 1:
                Q[i, i - 1] = self.down[i]
            for j, r in self.up[i].items():
                Q[i, j] = r
            Q[i, i] = -Q[i].sum()
        return Q

    def upper_partial(self, n: int) -> np.ndarray:
        """Suffix sums sum_{j >= k} q_{nj} for k = n+1..N"""
        dense = np.zeros(self.N + 1)
        for j, r in self.up[n].items():
            dense[j] = r
        return np.cumsum(dense[::-1])[::-1][n + 1:]
