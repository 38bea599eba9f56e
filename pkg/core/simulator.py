"""
Monte Carlo oracle for the minimal process

Paths follow the jump chain Pi_ik = q_ik / q_i with exponential holding times of rate q_i.
Estimators run many paths in lockstep (one numpy step per jump across the batch);
worker streams are Philox generators spawned from one SeedSequence, so results depend
only on (seed, workers).
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .config import SimulationOptions
from .errors import AllCapped, DomainError
from .model import RateRow, SingleBirthModel

logger = logging.getLogger(__name__)

ALIAS_THRESHOLD = 8

HIT, HORIZON, LEVEL = 0, 1, 2
_RUNNING = -1


# -- stop rules ------------------------------------------------------------------

@dataclass(frozen=True)
class FirstReturnTo:
    """First visit to ``target`` after at least one jump"""
    target: int


@dataclass(frozen=True)
class FirstHit:
    """First visit to ``target`` (time 0 when starting there)"""
    target: int


@dataclass(frozen=True)
class TimeHorizon:
    T: float


@dataclass(frozen=True)
class LevelCap:
    """Stop on entering ``level``; used as a proxy for explosion"""
    level: int


StopRule = Union[FirstReturnTo, FirstHit, TimeHorizon, LevelCap]


@dataclass(frozen=True)
class Caps:
    """Safety caps: a level and either a fixed time or time_scale / min visited q_i"""
    level: int
    time: Optional[float] = None
    time_scale: float = 1e6

    @classmethod
    def default(cls, model: SingleBirthModel, N: int = 1000,
                opts: Optional[SimulationOptions] = None) -> 'Caps':
        opts = opts or SimulationOptions()
        level = opts.level_cap_factor * max(N, 1)
        if model.horizon is not None:
            level = min(level, model.horizon)
        return cls(level, None, opts.time_horizon_scale)


@dataclass
class Terminal:
    kind: str                 # 'hit', 'horizon' or 'level'
    time: float
    level: Optional[int] = None


@dataclass
class Trajectory:
    states: List[int]
    jump_times: List[float]
    terminal: Terminal

    @property
    def time(self) -> float:
        return self.terminal.time

    @property
    def capped(self) -> bool:
        return self.terminal.kind != 'hit'


@dataclass
class EstimateWithError:
    mean: float
    std_error: float
    samples: int
    capped_fraction: float
    bracket: Optional[Tuple[float, float]] = None
    details: Dict[str, float] = field(default_factory=dict)

    @property
    def bias_warning(self) -> bool:
        return self.capped_fraction > 0

    def to_dict(self) -> Dict[str, object]:
        return {'mean': self.mean, 'std_error': self.std_error, 'samples': self.samples,
                'capped_fraction': self.capped_fraction, 'bias_warning': self.bias_warning,
                'bracket': None if self.bracket is None else list(self.bracket),
                'details': dict(self.details)}


# -- sampling ------------------------------------------------------------------

def _alias_tables(weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vose's alias tables for a discrete law proportional to ``weights``"""
    n = len(weights)
    scaled = weights * n / weights.sum()
    prob = np.zeros(n)
    alias = np.zeros(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] + scaled[s] - 1.0
        (small if scaled[l] < 1.0 else large).append(l)
    for i in large + small:
        prob[i] = 1.0
    return prob, alias


class _RowSampler:
    """Down-jump target sampler for one row, over runs of equal rates"""

    def __init__(self, model: SingleBirthModel, i: int):
        runs = model.down_runs(i)
        self.starts = np.array([s for s, _, _ in runs], dtype=np.int64)
        self.lengths = np.array([e - s for s, e, _ in runs], dtype=np.int64)
        weights = np.array([r * (e - s) for s, e, r in runs], dtype=float)
        self.use_alias = len(runs) > ALIAS_THRESHOLD
        if self.use_alias:
            self.prob, self.alias = _alias_tables(weights)
        elif len(runs):
            self.cumulative = np.cumsum(weights) / weights.sum()

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.use_alias:
            k = rng.integers(0, len(self.prob), size=size)
            keep = rng.random(size) < self.prob[k]
            run = np.where(keep, k, self.alias[k])
        else:
            run = np.minimum(np.searchsorted(self.cumulative, rng.random(size), side='right'),
                             len(self.cumulative) - 1)
        offset = np.minimum((rng.random(size) * self.lengths[run]).astype(np.int64), self.lengths[run] - 1)
        return self.starts[run] + offset


class _RateCache:
    """Rates and samplers for the states visited by one worker"""

    def __init__(self, model: SingleBirthModel):
        self.model = model
        self.up = np.zeros(0)
        self.total = np.zeros(0)
        self._samplers: Dict[int, _RowSampler] = {}

    def ensure(self, top: int) -> None:
        known = len(self.up)
        if top < known:
            return
        rows: List[RateRow] = [self.model.row(i) for i in range(known, top + 1)]
        self.up = np.concatenate([self.up, [r.up for r in rows]])
        self.total = np.concatenate([self.total, [r.total for r in rows]])

    def sampler(self, i: int) -> _RowSampler:
        sampler = self._samplers.get(i)
        if sampler is None:
            sampler = _RowSampler(self.model, i)
            self._samplers[i] = sampler
        return sampler


def _generators(seed: int, workers: int) -> List[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(workers)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def sample_jumps(model: SingleBirthModel, i: int, size: int,
                 seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """``size`` independent (next state, holding time) draws from state i"""
    if size < 1:
        raise DomainError("size must be positive", size=size)
    rng = _generators(seed, 1)[0]
    row = model.row(i)
    holding = rng.exponential(1.0, size=size) / row.total
    targets = np.full(size, i + 1, dtype=np.int64)
    down = rng.random(size) * row.total >= row.up
    if down.any():
        targets[down] = _RowSampler(model, i).draw(rng, int(down.sum()))
    return targets, holding


# -- single trajectories ---------------------------------------------------------

def simulate(model: SingleBirthModel, start: int, stop: StopRule, rng_seed: int = 0,
             caps: Optional[Caps] = None) -> Trajectory:
    """One path of the minimal process from ``start`` until ``stop`` or a cap"""
    model.check_state(start)
    caps = caps or Caps.default(model)
    rng = _generators(rng_seed, 1)[0]
    cache = _RateCache(model)
    target = stop.target if isinstance(stop, (FirstReturnTo, FirstHit)) else None
    level = stop.level if isinstance(stop, LevelCap) else caps.level
    fixed_time = stop.T if isinstance(stop, TimeHorizon) else caps.time

    states, times = [start], [0.0]
    if isinstance(stop, FirstHit) and start == target:
        return Trajectory(states, times, Terminal('hit', 0.0))
    if start >= level:
        kind = 'hit' if isinstance(stop, LevelCap) else 'level'
        return Trajectory(states, times, Terminal(kind, 0.0, start))
    state, t, min_q = start, 0.0, math.inf
    while True:
        cache.ensure(state)
        q = cache.total[state]
        min_q = min(min_q, q)
        limit = fixed_time if fixed_time is not None else caps.time_scale / min_q
        t_next = t + rng.exponential(1.0) / q
        if t_next > limit:
            kind = 'hit' if isinstance(stop, TimeHorizon) else 'horizon'
            return Trajectory(states, times, Terminal(kind, limit))
        t = t_next
        if rng.random() * q < cache.up[state]:
            state += 1
        else:
            state = int(cache.sampler(state).draw(rng, 1)[0])
        states.append(state)
        times.append(t)
        if target is not None and state == target:
            return Trajectory(states, times, Terminal('hit', t))
        if state >= level:
            kind = 'hit' if isinstance(stop, LevelCap) else 'level'
            return Trajectory(states, times, Terminal(kind, t, state))


# -- batches ---------------------------------------------------------------------

def _run_batch(model: SingleBirthModel, start: int, stop: StopRule, caps: Caps,
               rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Times and outcome codes (HIT, HORIZON, LEVEL) of ``size`` lockstep paths"""
    cache = _RateCache(model)
    target = stop.target if isinstance(stop, (FirstReturnTo, FirstHit)) else None
    level = stop.level if isinstance(stop, LevelCap) else caps.level
    fixed_time = stop.T if isinstance(stop, TimeHorizon) else None
    level_code = HIT if isinstance(stop, LevelCap) else LEVEL
    horizon_code = HIT if isinstance(stop, TimeHorizon) else HORIZON
    if fixed_time is None:
        fixed_time = caps.time

    times = np.zeros(size)
    outcome = np.full(size, _RUNNING, dtype=np.int8)
    if size == 0:
        return times, outcome
    if isinstance(stop, FirstHit) and start == target:
        outcome[:] = HIT
        return times, outcome
    if start >= level:
        outcome[:] = level_code
        return times, outcome

    state = np.full(size, start, dtype=np.int64)
    min_q = np.full(size, np.inf)
    active = np.arange(size)
    while active.size:
        s = state[active]
        cache.ensure(int(s.max()))
        q = cache.total[s]
        min_q[active] = np.minimum(min_q[active], q)
        t_next = times[active] + rng.exponential(1.0, size=active.size) / q
        limit = np.full(active.size, fixed_time) if fixed_time is not None \
            else caps.time_scale / min_q[active]
        over = t_next > limit
        times[active] = np.where(over, limit, t_next)
        outcome[active[over]] = horizon_code

        moving = ~over
        go, s_go, q_go = active[moving], s[moving], q[moving]
        nxt = s_go + 1
        down = rng.random(go.size) * q_go >= cache.up[s_go]
        if down.any():
            down_idx = np.nonzero(down)[0]
            for st in np.unique(s_go[down_idx]):
                sel = down_idx[s_go[down_idx] == st]
                nxt[sel] = cache.sampler(int(st)).draw(rng, sel.size)
        state[go] = nxt
        if target is not None:
            outcome[go[nxt == target]] = HIT
        reached = (nxt >= level) & (outcome[go] == _RUNNING)
        outcome[go[reached]] = level_code
        active = go[outcome[go] == _RUNNING]
    return times, outcome


def _simulate_many(model: SingleBirthModel, start: int, stop: StopRule, samples: int,
                   caps: Caps, seed: int, workers: int) -> Tuple[np.ndarray, np.ndarray]:
    if samples < 1:
        raise DomainError("samples must be positive", samples=samples)
    model.check_state(start)
    rngs = _generators(seed, workers)
    sizes = [len(part) for part in np.array_split(np.arange(samples), workers)]
    logger.info("simulating %d paths of %s from %d (%s, level cap %d, %d workers)",
                samples, model.name, start, stop, caps.level, workers)
    if workers == 1:
        results = [_run_batch(model, start, stop, caps, rngs[0], samples)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda args: _run_batch(model, start, stop, caps, *args),
                                    zip(rngs, sizes)))
    times = np.concatenate([r[0] for r in results])
    outcome = np.concatenate([r[1] for r in results])
    capped = int(np.sum(outcome != HIT))
    if capped:
        logger.warning("%d of %d paths hit a cap", capped, samples)
    return times, outcome


def _summarize(values: np.ndarray, samples: int, capped: int) -> EstimateWithError:
    if values.size == 0:
        raise AllCapped(samples)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return EstimateWithError(mean, se, int(values.size), capped / samples)


def _resolve(model: SingleBirthModel, caps: Optional[Caps],
             opts: Optional[SimulationOptions]) -> Tuple[Caps, SimulationOptions]:
    opts = opts or SimulationOptions()
    return caps or Caps.default(model, opts=opts), opts


def estimate_return_time_moment(model: SingleBirthModel, n: int, ell: int = 1,
                                samples: Optional[int] = None, caps: Optional[Caps] = None,
                                seed: Optional[int] = None, workers: Optional[int] = None,
                                opts: Optional[SimulationOptions] = None,
                                of: str = 'return_time') -> EstimateWithError:
    """Sample mean of T^ell from n, T = sigma_0 ('return_time') or the life time ('lifetime').

    Capped paths are excluded and counted. A life time is followed up to the level cap, so
    the mean is that of the time to reach the cap and ``bracket`` is (mean, inf).
    """
    if of not in ('return_time', 'lifetime'):
        raise DomainError(f"unknown functional '{of}' (return_time, lifetime)")
    caps, opts = _resolve(model, caps, opts)
    if ell < 1:
        raise DomainError("moment order must be positive", ell=ell)
    samples = opts.samples if samples is None else samples
    stop = FirstReturnTo(0) if of == 'return_time' else LevelCap(caps.level)
    times, outcome = _simulate_many(model, n, stop, samples, caps,
                                    opts.seed if seed is None else seed,
                                    opts.workers if workers is None else workers)
    ok = outcome == HIT
    estimate = _summarize(times[ok] ** ell, samples, int((~ok).sum()))
    if of == 'lifetime':
        estimate.bracket = (estimate.mean, math.inf)
    return estimate


def estimate_hitting_time_moment(model: SingleBirthModel, n: int, target: int, ell: int = 1,
                                 samples: Optional[int] = None, caps: Optional[Caps] = None,
                                 seed: Optional[int] = None,
                                 opts: Optional[SimulationOptions] = None) -> EstimateWithError:
    """Sample mean of sigma_target^ell from n (return time when n == target)"""
    caps, opts = _resolve(model, caps, opts)
    samples = opts.samples if samples is None else samples
    times, outcome = _simulate_many(model, n, FirstReturnTo(target), samples, caps,
                                    opts.seed if seed is None else seed, opts.workers)
    ok = outcome == HIT
    return _summarize(times[ok] ** ell, samples, int((~ok).sum()))


def estimate_transform(model: SingleBirthModel, n: int, lam: float, of: str = 'return_time',
                       samples: Optional[int] = None, caps: Optional[Caps] = None,
                       seed: Optional[int] = None, workers: Optional[int] = None,
                       opts: Optional[SimulationOptions] = None) -> EstimateWithError:
    """Sample mean of e^{lam T}, T = sigma_0 ('return_time') or the life time ('lifetime').

    Capped paths are excluded from the mean; ``bracket`` bounds the value had they been
    followed to the end.
    """
    if of not in ('return_time', 'lifetime'):
        raise DomainError(f"unknown functional '{of}' (return_time, lifetime)")
    caps, opts = _resolve(model, caps, opts)
    samples = opts.samples if samples is None else samples
    if samples < 1:
        raise DomainError("samples must be positive", samples=samples)
    if lam == 0:
        return EstimateWithError(1.0, 0.0, samples, 0.0, (1.0, 1.0))
    stop = FirstReturnTo(0) if of == 'return_time' else LevelCap(caps.level)
    times, outcome = _simulate_many(model, n, stop, samples, caps,
                                    opts.seed if seed is None else seed,
                                    opts.workers if workers is None else workers)
    ok = outcome == HIT
    with np.errstate(over='ignore'):
        values = np.exp(lam * times)
    estimate = _summarize(values[ok], samples, int((~ok).sum()))
    # a capped path ran at least its recorded time
    total_ok = float(values[ok].sum())
    with_capped = (total_ok + float(values[~ok].sum())) / samples
    if lam < 0:
        estimate.bracket = (total_ok / samples, with_capped)
    else:
        estimate.bracket = (with_capped, math.inf if (~ok).any() else with_capped)
    return estimate


def estimate_return_probability(model: SingleBirthModel, n: int, samples: Optional[int] = None,
                                caps: Optional[Caps] = None, seed: Optional[int] = None,
                                opts: Optional[SimulationOptions] = None) -> EstimateWithError:
    """P_n(sigma_0 < inf); reaching the level cap counts as no return, time caps are excluded"""
    caps, opts = _resolve(model, caps, opts)
    samples = opts.samples if samples is None else samples
    times, outcome = _simulate_many(model, n, FirstReturnTo(0), samples, caps,
                                    opts.seed if seed is None else seed, opts.workers)
    decided = outcome != HORIZON
    hits = (outcome[decided] == HIT).astype(float)
    estimate = _summarize(hits, samples, int((~decided).sum()))
    estimate.details['escaped'] = float(np.sum(outcome == LEVEL))
    return estimate
