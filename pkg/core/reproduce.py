"""
Reproduction suite: the worked examples and property checks run end to end
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .config import AnalysisOptions, SimulationOptions
from .criteria import (analyze, exp_moment_return, hitting_moment, laplace_return,
                       mean_return_time, mz_sufficient_condition, uniqueness)
from .errors import NumericError
from .model import (RateRow, SingleBirthModel, SingleDeathModel, build_tabulated,
                    model_birth_death, model_constant_column, model_uniform_catastrophe)
from .oracles import dense_poisson_solve, dense_single_death_solve, mean_return_time_oracle
from .poisson import (PoissonProblem, TriangularSystem, gamma_comparison_gap, gamma_matrix,
                      solve_poisson, solve_poisson_finite, solve_poisson_single_death_finite)
from .sequences import CoefficientVector, SequenceTable
from .simulator import Caps, estimate_return_time_moment

logger = logging.getLogger(__name__)

PASS, FAIL, INCONCLUSIVE = 'pass', 'fail', 'inconclusive'


@dataclass
class CheckResult:
    name: str
    status: str
    detail: str
    seconds: float = 0.0


@dataclass
class SuiteResult:
    results: List[CheckResult] = field(default_factory=list)
    strict: bool = False

    @property
    def passed(self) -> bool:
        bad = {FAIL, INCONCLUSIVE} if self.strict else {FAIL}
        return not any(r.status in bad for r in self.results)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else 1

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{'check': r.name, 'status': r.status, 'seconds': round(r.seconds, 2),
                              'detail': r.detail} for r in self.results],
                            columns=['check', 'status', 'seconds', 'detail'])

    def to_text(self) -> str:
        frame = self.to_frame()
        if frame.empty:
            return "no checks selected"
        counts = frame['status'].value_counts().to_dict()
        summary = ", ".join(f"{counts.get(s, 0)} {s}" for s in (PASS, FAIL, INCONCLUSIVE))
        return frame.to_string(index=False) + "\n\n" + summary


@dataclass
class SuiteContext:
    N: Optional[int]
    opts: AnalysisOptions
    sim: SimulationOptions
    rng: np.random.Generator

    def trunc(self, default: int) -> int:
        return default if self.N is None else self.N


# -- random models ------------------------------------------------------------------

def random_rows(rng: np.random.Generator, N: int, up: Tuple[float, float] = (1.0, 2.0),
                down: Tuple[float, float] = (0.05, 0.3), reach: int = 3) -> List[RateRow]:
    """Rows 0..N with up-rates in ``up`` and up to three down-rates within ``reach`` below"""
    rows = [RateRow(rng.uniform(*up))]
    for n in range(1, N + 1):
        lo = max(0, n - reach)
        count = int(rng.integers(1, min(3, n - lo) + 1))
        targets = rng.choice(np.arange(lo, n), size=count, replace=False)
        rows.append(RateRow(rng.uniform(*up), {int(j): rng.uniform(*down) for j in targets}))
    return rows


def random_single_death(rng: np.random.Generator, N: int) -> SingleDeathModel:
    down = np.concatenate([[0.0], rng.uniform(1.0, 2.0, size=N)])
    up = []
    for i in range(N + 1):
        targets = [j for j in range(i + 1, min(N, i + 3) + 1)]
        up.append({j: rng.uniform(0.05, 0.3) for j in targets if rng.random() < 0.7})
    c = -rng.uniform(0.0, 0.5, size=N + 1) * (rng.random(N + 1) < 0.5)
    c[int(rng.integers(0, N + 1))] = -rng.uniform(0.1, 0.5)
    return SingleDeathModel(down, up, c)


def random_ergodic_model(rng: np.random.Generator) -> SingleBirthModel:
    if rng.random() < 0.5:
        return model_uniform_catastrophe(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0))
    return model_birth_death(float(rng.uniform(0.5, 1.0)), float(rng.uniform(1.5, 3.0)))


# -- checks --------------------------------------------------------------------------

def check_catastrophe_laplace(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(500)
    worst = 0.0
    for b in (3.0, 0.5, 5.0):
        mv = laplace_return(model_uniform_catastrophe(2.0, b, 1.0), 0.5, N, ctx.opts)
        worst = max(worst, abs(mv[0] - 8.0 / 15.0), float(np.max(np.abs(mv.values[1:21] - 0.8))))
    return (PASS if worst <= 1e-6 else FAIL), f"max deviation {worst:.3g} over b in (3, 0.5, 5)"


def check_catastrophe_strong_ergodicity(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(1000)
    model = model_uniform_catastrophe(1.0, 1.0, 1.0)
    report = analyze(model, N, ctx.opts)
    d = report['d'].value
    strongly = report.verdicts.get('strongly_ergodic')
    exp = exp_moment_return(model, 0.5, N, ctx.opts)
    dev = float(np.max(np.abs(exp.E.values[1:21] - 2.0)))
    if strongly == 'Inconclusive':
        return INCONCLUSIVE, f"d={d}, strongly_ergodic Inconclusive"
    ok = d is not None and abs(d - 1.0) <= 1e-6 and strongly == 'Holds' and dev <= 1e-6
    return (PASS if ok else FAIL), f"d={d}, strongly_ergodic={strongly}, exp-moment deviation {dev:.3g}"


def check_constant_column_dichotomy(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(1000)
    explosive = model_constant_column(1.0, '(i+1)^2')
    verdict = uniqueness(explosive, N, ctx.opts)
    kappa_prime = verdict.diagnostics.get('kummer_kappa_prime')
    report = analyze(model_constant_column(1.0, 'i+1'), N, ctx.opts)
    d = report['d'].value
    ok = (verdict.fails and kappa_prime is not None and kappa_prime > 1
          and report.verdicts.get('unique') == 'Holds'
          and report.verdicts.get('strongly_ergodic') == 'Holds'
          and d is not None and abs(d - 1.0) <= 1e-6)
    return (PASS if ok else FAIL), (f"(n+1)^2: unique={verdict.status.value}, kappa'={kappa_prime}; "
                                    f"n+1: {report.verdicts}, d={d}")


def check_residual_property(ctx: SuiteContext) -> Tuple[str, str]:
    N = 50
    worst = 0.0
    for _ in range(200):
        model = build_tabulated(random_rows(ctx.rng, N), name='random')
        c = CoefficientVector(-ctx.rng.uniform(0.0, 0.02, size=N + 1))
        f = ctx.rng.uniform(-1.0, 1.0, size=N + 1)
        solution = solve_poisson(PoissonProblem(model, c, f, float(ctx.rng.uniform(-1, 1)), N))
        if solution.residual is None:
            return FAIL, "solution left the double range"
        worst = max(worst, solution.residual)
    return (PASS if worst <= 1e-9 else FAIL), f"max residual {worst:.3g} over 200 models"


def check_finite_oracles(ctx: SuiteContext) -> Tuple[str, str]:
    worst, trivial = 0.0, 0.0
    for _ in range(100):
        N = int(ctx.rng.integers(2, 21))
        model = build_tabulated(random_rows(ctx.rng, N), name='random')
        cv = -ctx.rng.uniform(0.0, 0.5, size=N + 1) * (ctx.rng.random(N + 1) < 0.5)
        cv[int(ctx.rng.integers(0, N + 1))] = -ctx.rng.uniform(0.1, 0.5)
        c = CoefficientVector(cv)
        f = ctx.rng.uniform(-1.0, 1.0, size=N + 1)
        ours = solve_poisson_finite(model, c, f, N).g
        dense = dense_poisson_solve(model, c, f, N)
        worst = max(worst, float(np.max(np.abs(ours - dense)) / max(1.0, np.max(np.abs(dense)))))
        trivial = max(trivial, float(np.max(np.abs(solve_poisson_finite(model, c, 0.0, N).g))))

        sd = random_single_death(ctx.rng, N)
        ours = solve_poisson_single_death_finite(sd, f).g
        dense = dense_single_death_solve(sd, f)
        worst = max(worst, float(np.max(np.abs(ours - dense)) / max(1.0, np.max(np.abs(dense)))))
        trivial = max(trivial, float(np.max(np.abs(solve_poisson_single_death_finite(sd, 0.0).g))))
    ok = worst <= 1e-10 and trivial == 0.0
    return (PASS if ok else FAIL), f"max relative gap {worst:.3g}, max |g| for f=0: {trivial:.3g}"


def check_mean_return_dual_oracles(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(1000)
    model = model_birth_death(1.0, 2.0)
    result = mean_return_time(model, N, ctx.opts)
    E0 = result.E[0]
    dense = mean_return_time_oracle(model, 60)
    mc = estimate_return_time_moment(model, 0, 1, samples=ctx.sim.samples,
                                     caps=Caps(level=200, time_scale=ctx.sim.time_horizon_scale),
                                     seed=ctx.sim.seed, opts=ctx.sim)
    ok = (abs(E0 - 2.0) <= 1e-9 and abs(dense - 2.0) <= 1e-6
          and abs(mc.mean - E0) <= 3 * mc.std_error + 1e-12 and result.strongly_ergodic.fails)
    return (PASS if ok else FAIL), (f"formula {E0!r}, dense {dense!r}, MC {mc.mean:.5g}+-{mc.std_error:.2g}, "
                                    f"strongly_ergodic={result.strongly_ergodic.status.value}")


def check_moment_recursion(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(400)
    worst = 0.0
    for _ in range(20):
        model = random_ergodic_model(ctx.rng)
        table = SequenceTable(model, None, N)
        mean = mean_return_time(model, N, ctx.opts, table)
        hit = hitting_moment(model, 0, 1, N, ctx.opts, table)
        upto = min(N if mean.E.reliable_upto is None else mean.E.reliable_upto,
                   N if hit.E.reliable_upto is None else hit.E.reliable_upto)
        a, b = mean.E.values[:upto + 1], hit.E.values[:upto + 1]
        worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    model = model_birth_death(1.0, 2.0)
    second = hitting_moment(model, 0, 2, N, ctx.opts)
    mc = estimate_return_time_moment(model, 0, 2, samples=ctx.sim.samples,
                                     caps=Caps(level=200, time_scale=ctx.sim.time_horizon_scale),
                                     seed=ctx.sim.seed + 1, opts=ctx.sim)
    ok = worst <= 1e-8 and abs(mc.mean - second.E_i0) <= 3 * mc.std_error
    return (PASS if ok else FAIL), (f"max relative gap {worst:.3g}; E sigma_0^2 = {second.E_i0:.6g}, "
                                    f"MC {mc.mean:.5g}+-{mc.std_error:.2g}")


def check_transform_calculus(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(500)
    model = model_uniform_catastrophe(1.0, 1.0, 1.0)
    h = 1e-5
    mean = mean_return_time(model, N, ctx.opts).E.values[:11]
    lap = laplace_return(model, h, N, ctx.opts).values[:11]
    exp = exp_moment_return(model, h, N, ctx.opts).E.values[:11]
    derivative = (lap - exp) / (2 * h)
    gap = float(np.max(np.abs(derivative + mean) / np.abs(mean)))
    bounds = bool(np.all((lap > 0) & (lap <= 1)) and np.all(exp >= 1))
    ok = gap <= 1e-4 and bounds
    return (PASS if ok else FAIL), f"max relative derivative gap {gap:.3g}, bounds {'ok' if bounds else 'violated'}"


def check_sequence_identities(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(1000)
    models = [model_uniform_catastrophe(1.0, 1.0, 1.0), model_uniform_catastrophe(2.0, 3.0, 1.0),
              model_birth_death(1.0, 2.0), model_birth_death(2.0, 1.0),
              model_constant_column(1.0, 'i+1'), model_constant_column(1.0, '(i+1)^2')]
    presets = [CoefficientVector.zero(), CoefficientVector.killing(0.5), CoefficientVector.constant(0.1)]
    worst = 0.0
    for model in models:
        for c in presets:
            try:
                worst = max(worst, SequenceTable(model, c, N).identity_error())
            except NumericError as exc:
                logger.info("identity check skipped for %s, c=%s: %s", model.name, c.label, exc.message)
    dual_gap = 0.0
    for model in models[:3]:
        table = SequenceTable(model, None, 30, columns='all')
        for i in range(0, 30, 7):
            fwd, dual = table.column(i), table.dual_column(i)
            nz = fwd.sign != 0
            dual_gap = max(dual_gap, float(np.max(np.abs(np.expm1(dual.log[nz] - fwd.log[nz])))))
    gamma_gap = math.inf
    for _ in range(500):
        size = int(ctx.rng.integers(2, 26))
        alpha = np.tril(ctx.rng.uniform(0.0, 1.0, size=(size, size)), k=-1)
        beta = ctx.rng.uniform(0.5, 2.0, size=size)
        G = gamma_matrix(TriangularSystem(alpha, np.zeros(size), beta))
        gamma_gap = min(gamma_gap, gamma_comparison_gap(G))
    ok = worst <= 1e-12 and dual_gap <= 1e-10 and gamma_gap >= -1e-12
    return (PASS if ok else FAIL), (f"identity {worst:.3g}, dual {dual_gap:.3g}, "
                                    f"min gamma gap {gamma_gap:.3g}")


def check_monotone_limit(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(200)
    model = model_uniform_catastrophe(1.0, 1.0, 1.0)
    base = SequenceTable(model, None, N).m
    previous = None
    monotone = True
    gaps = []
    lams = (1.0, 0.1, 0.01, 0.001)
    for lam in lams:
        m = SequenceTable(model, CoefficientVector.killing(lam), N).m
        if previous is not None and np.any(m.log > previous.log + 1e-12):
            monotone = False
        gaps.append(float(np.max(np.expm1(m.log - base.log))))
        previous = m
    shrinking = all(b <= a for a, b in zip(gaps, gaps[1:]))
    # the relative gap behaves like 3 lambda for small lambda
    close = all(g <= 5 * lam for lam, g in zip(lams, gaps) if lam <= 0.1)
    ok = monotone and shrinking and close
    return (PASS if ok else FAIL), (f"nonincreasing as lambda decreases: {monotone}, "
                                    f"relative gaps {', '.join(f'{g:.3g}' for g in gaps)}")


def check_mz_condition(ctx: SuiteContext) -> Tuple[str, str]:
    N = ctx.trunc(1000)
    finite = mz_sufficient_condition(model_uniform_catastrophe(1.0, 1.0, 1.0), N, ctx.opts)
    divergent = mz_sufficient_condition(model_constant_column(1.0, '2*(i+1)'), N, ctx.opts)
    ok = finite.sufficient.holds and divergent.M.is_infinite
    return (PASS if ok else FAIL), (f"uniform catastrophe M={finite.M.value}; "
                                    f"constant column b=2 M={divergent.M.value}")


CHECKS: Dict[str, Callable[[SuiteContext], Tuple[str, str]]] = {
    'catastrophe-laplace': check_catastrophe_laplace,
    'catastrophe-strong-ergodicity': check_catastrophe_strong_ergodicity,
    'constant-column-dichotomy': check_constant_column_dichotomy,
    'poisson-residual': check_residual_property,
    'finite-oracles': check_finite_oracles,
    'mean-return-oracles': check_mean_return_dual_oracles,
    'moment-recursion': check_moment_recursion,
    'transform-calculus': check_transform_calculus,
    'sequence-identities': check_sequence_identities,
    'monotone-limit': check_monotone_limit,
    'mz-condition': check_mz_condition,
}


def run_suite(filter: Optional[str] = None, N: Optional[int] = None, strict: bool = False,
              opts: Optional[AnalysisOptions] = None, sim: Optional[SimulationOptions] = None,
              seed: int = 2024) -> SuiteResult:
    """Run the selected checks; ``filter`` keeps the names containing it"""
    ctx = SuiteContext(N, opts or AnalysisOptions(), sim or SimulationOptions(), np.random.default_rng(seed))
    suite = SuiteResult(strict=strict)
    for name, check in CHECKS.items():
        if filter and filter not in name:
            continue
        started = time.perf_counter()
        try:
            status, detail = check(ctx)
        except NumericError as exc:
            status, detail = INCONCLUSIVE, f"{type(exc).__name__}: {exc.message}"
        elapsed = time.perf_counter() - started
        logger.info("check %s: %s (%.2fs)", name, status, elapsed)
        suite.results.append(CheckResult(name, status, detail, elapsed))
    return suite
