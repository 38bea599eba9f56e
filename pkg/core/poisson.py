"""
Triangular recursions, gamma tables and the Poisson equation Omega g = f

Omega = Q + c with (Qg)_i = sum_j q_ij (g_j - g_i). The increments w_k = g_{k+1} - g_k
solve the streaming recursion of ``sequences.forward_solve`` with right-hand side
f_j - c_j g0, so every solution is fixed by its value g0 at 0.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import DegenerateBoundary, DomainError, StructureError
from .expressions import compile_expression
from .model import SingleBirthModel, SingleDeathModel
from .scaled import ScaledArray, signed_logsumexp
from .sequences import CoefficientVector, SequenceTable, forward_solve, partial_row_sums

logger = logging.getLogger(__name__)

FSpec = Union[float, str, Sequence[float], np.ndarray, Callable[[int], float]]

BOUNDARY_TOL = 1e-12


# -- triangular systems -------------------------------------------------------

@dataclass
class TriangularSystem:
    """h_n = (sum_{k<n} alpha_nk h_k + f_n) / beta_n for n = 0..N"""
    alpha: np.ndarray
    f: np.ndarray
    beta: Optional[np.ndarray] = None

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        n = len(self.f)
        if self.alpha.shape != (n, n):
            raise StructureError(f"alpha must be {n}x{n} to match f, got {self.alpha.shape}")
        if np.any(np.triu(self.alpha) != 0):
            raise StructureError("alpha must be strictly lower triangular")
        if self.beta is not None:
            self.beta = np.asarray(self.beta, dtype=float)
            if self.beta.shape != (n,):
                raise StructureError("beta must have one entry per row")
            if np.any(self.beta == 0):
                raise StructureError("beta entries must be nonzero")

    @property
    def size(self) -> int:
        return len(self.f)

    @property
    def divisors(self) -> np.ndarray:
        return np.ones(self.size) if self.beta is None else self.beta

    def with_rhs(self, f: Sequence[float]) -> 'TriangularSystem':
        return TriangularSystem(self.alpha, np.asarray(f, dtype=float), self.beta)


def solve_triangular(system: TriangularSystem, via: str = 'forward') -> np.ndarray:
    """Forward substitution, or the representation h_n = sum_k gamma_nk f_k / beta_k"""
    beta = system.divisors
    if via == 'gamma':
        gamma = gamma_matrix(system)
        return gamma @ (system.f / beta)
    if via != 'forward':
        raise ValueError(f"unknown solution route '{via}'")
    h = np.zeros(system.size)
    for n in range(system.size):
        h[n] = (system.alpha[n, :n] @ h[:n] + system.f[n]) / beta[n]
    return h


def gamma_table(alpha: np.ndarray, beta: Optional[np.ndarray], k: int, N: int) -> np.ndarray:
    """gamma_nk for n = k..N: gamma_kk = 1, gamma_nk = sum_{k<=j<n} alpha_nj gamma_jk / beta_n"""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.ones(N + 1) if beta is None else np.asarray(beta, dtype=float)
    out = np.zeros(N - k + 1)
    out[0] = 1.0
    for n in range(k + 1, N + 1):
        out[n - k] = alpha[n, k:n] @ out[:n - k] / beta[n]
    return out


def gamma_matrix(system: TriangularSystem) -> np.ndarray:
    """Full lower triangle Gamma[n, k] = gamma_nk (forward form)"""
    N = system.size - 1
    G = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        G[k:, k] = gamma_table(system.alpha, system.beta, k, N)
    return G


def gamma_dual_matrix(system: TriangularSystem) -> np.ndarray:
    """The same table from the backward form gamma_nk = sum_{k<j<=n} gamma_nj alpha_jk / beta_j"""
    N = system.size - 1
    beta = system.divisors
    G = np.zeros((N + 1, N + 1))
    for n in range(N + 1):
        G[n, n] = 1.0
        for k in range(n - 1, -1, -1):
            G[n, k] = np.sum(G[n, k + 1:n + 1] * system.alpha[k + 1:n + 1, k] / beta[k + 1:n + 1])
    return G


def gamma_dual_table(alpha: np.ndarray, beta: Optional[np.ndarray], k: int, N: int) -> np.ndarray:
    """gamma_nk for n = k..N from the backward form"""
    alpha = np.asarray(alpha, dtype=float)
    size = N + 1
    system = TriangularSystem(alpha[:size, :size], np.zeros(size),
                              None if beta is None else np.asarray(beta, dtype=float)[:size])
    return gamma_dual_matrix(system)[k:, k]


def gamma_comparison_gap(G: np.ndarray) -> float:
    """min over n >= i >= j of gamma_nj - gamma_ni gamma_ij (nonnegative for nonnegative systems)"""
    N = G.shape[0] - 1
    gap = math.inf
    for i in range(N + 1):
        # rows n >= i, columns j <= i
        outer = np.outer(G[i:, i], G[i, :i + 1])
        gap = min(gap, float(np.min(G[i:, :i + 1] - outer)))
    return gap


def model_system(model: SingleBirthModel, c: Optional[CoefficientVector], N: int,
                 f: Optional[Sequence[float]] = None) -> TriangularSystem:
    """alpha_nk = q~_n^(k), beta_n = q_{n,n+1}; gamma_n0 then equals F~_n^(0)"""
    model.check_state(N)
    c = c or CoefficientVector.zero()
    alpha = np.zeros((N + 1, N + 1))
    for n in range(1, N + 1):
        alpha[n, :n] = partial_row_sums(model, n) - c(n)
    rhs = np.zeros(N + 1) if f is None else np.asarray(f, dtype=float)
    return TriangularSystem(alpha, rhs, model.up_rates(N))


# -- Poisson problems ----------------------------------------------------------

def f_vector(f: FSpec, N: int) -> np.ndarray:
    """f_0..f_N from a constant, an expression in i, an array or a callable"""
    if isinstance(f, str):
        fn = compile_expression(f)
        return np.array([fn(i) for i in range(N + 1)])
    if callable(f):
        return np.array([float(f(i)) for i in range(N + 1)])
    if np.isscalar(f):
        return np.full(N + 1, float(f))
    arr = np.asarray(f, dtype=float)
    if len(arr) < N + 1:
        raise DomainError(f"f has {len(arr)} entries, {N + 1} needed")
    return arr[:N + 1].copy()


def rate_to(model: SingleBirthModel, i: int, j: int) -> float:
    """q_ij for i != j"""
    if j == i + 1:
        return model.up(i)
    if j < i:
        return model.row(i).down.get(j, 0.0)
    return 0.0


PRESETS = ('harmonic', 'uniqueness', 'recurrence', 'return-prob', 'ergodicity',
           'exp-moment', 'laplace', 'moment')


def problem_preset(name: str, model: SingleBirthModel, N: int, lam: float = 0.0,
                   g0: float = 1.0, i0: int = 0, c: Optional[CoefficientVector] = None,
                   previous: Optional[Sequence[float]] = None, ell: int = 1):
    """(c, f) of the named problem.

    With hit_i = q_{i,i0} (1 - delta_{i,i0}):
      harmonic     c given (default 0), f = 0
      uniqueness   c = -lam, f = 0
      recurrence   c = 0, f = hit_i
      return-prob  c = 0, f = hit_i (g0 - 1)
      ergodicity   c = 0, f = hit_i g0 - 1
      exp-moment   c = +lam, f = hit_i (g0 - 1)
      laplace      c = -lam, f = hit_i (g0 - 1)
      moment       c = 0, f = hit_i g0 - ell * previous_i
    """
    if name not in PRESETS:
        raise DomainError(f"unknown problem preset '{name}' ({', '.join(PRESETS)})")
    if name in ('uniqueness', 'exp-moment', 'laplace') and not lam > 0:
        raise DomainError(f"preset '{name}' needs lambda > 0", lam=lam)
    hit = np.array([0.0 if i == i0 else rate_to(model, i, i0) for i in range(N + 1)])
    if name == 'harmonic':
        return (c or CoefficientVector.zero()), np.zeros(N + 1)
    if name == 'uniqueness':
        return CoefficientVector.killing(lam), np.zeros(N + 1)
    if name == 'recurrence':
        return CoefficientVector.zero(), hit
    if name == 'return-prob':
        return CoefficientVector.zero(), hit * (g0 - 1.0)
    if name == 'ergodicity':
        return CoefficientVector.zero(), hit * g0 - 1.0
    if name == 'exp-moment':
        return CoefficientVector.constant(lam), hit * (g0 - 1.0)
    if name == 'laplace':
        return CoefficientVector.killing(lam), hit * (g0 - 1.0)
    if previous is None:
        raise DomainError("preset 'moment' needs the previous-order moments")
    return CoefficientVector.zero(), hit * g0 - ell * f_vector(previous, N)


@dataclass
class PoissonProblem:
    model: SingleBirthModel
    c: CoefficientVector
    f: FSpec
    g0: float
    N: int

    def __post_init__(self):
        self.model.check_state(self.N)
        if not math.isfinite(self.g0):
            raise DomainError("g0 must be finite")

    def f_values(self) -> np.ndarray:
        return f_vector(self.f, self.N)


@dataclass
class PoissonSolution:
    problem: PoissonProblem
    g: np.ndarray
    g_scaled: ScaledArray
    w: ScaledArray
    residual: Optional[float]
    method: str = 'recursive'
    notes: List[str] = field(default_factory=list)

    @property
    def g0(self) -> float:
        return self.problem.g0

    @property
    def representable(self) -> bool:
        return bool(np.all(self.g_scaled.representable))

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {'g0': self.g0, 'N': self.problem.N, 'method': self.method,
                                   'residual': self.residual, 'representable': self.representable}
        if self.representable:
            payload['g'] = [float(x) for x in self.g]
        else:
            payload['g'] = {'sign': self.g_scaled.sign.astype(int).tolist(),
                            'log': self.g_scaled.log.tolist()}
        if self.notes:
            payload['notes'] = list(self.notes)
        return payload


def _explicit_increments(model: SingleBirthModel, c: CoefficientVector, N: int,
                         rhs: np.ndarray) -> ScaledArray:
    """w_k = sum_{j<=k} F~_k^(j) rhs_j / q_{j,j+1} from the full F~ triangle"""
    table = SequenceTable(model, c, N, columns='all')
    weights = ScaledArray.from_floats(rhs / table.up)
    sign = np.zeros(N + 1, dtype=np.int8)
    log = np.full(N + 1, -np.inf)
    for k in range(N + 1):
        logs = np.array([table.column(j).log[k] for j in range(k + 1)]) + weights.log[:k + 1]
        signs = np.array([table.column(j).sign[k] for j in range(k + 1)]) * weights.sign[:k + 1]
        log[k], sign[k] = signed_logsumexp(logs, signs)
    return ScaledArray(sign, log)


def solve_poisson(problem: PoissonProblem, method: str = 'recursive') -> PoissonSolution:
    """g_n = g0 + sum_{k<n} sum_{j<=k} F~_k^(j) (f_j - c_j g0) / q_{j,j+1}"""
    model, c, N, g0 = problem.model, problem.c, problem.N, problem.g0
    f = problem.f_values()
    harmonic = not np.any(f)
    cvals = c.array(N)
    # harmonic case: profile for g0 = 1, then scaled by g0
    rhs = -cvals if harmonic else f - cvals * g0
    if method == 'recursive':
        w = forward_solve(model, c, N, rhs)[0]
    elif method == 'explicit':
        w = _explicit_increments(model, c, N, rhs)
    else:
        raise ValueError(f"unknown Poisson solution method '{method}'")

    if harmonic:
        profile = w.exclusive_cumsum() + 1.0
        g_scaled = profile * g0 if g0 != 0 else ScaledArray.zeros(N + 1)
        w = w * g0 if g0 != 0 else ScaledArray.zeros(N + 1)
    else:
        g_scaled = w.exclusive_cumsum() + g0
    g = g_scaled.to_floats()
    g[0] = g0
    notes: List[str] = []
    residual: Optional[float] = None
    if np.all(g_scaled.representable):
        residual = poisson_residual(model, c, f, g, N)
    else:
        notes.append("g leaves the double range; residual not evaluated")
    logger.debug("poisson solve on %s, N=%d, c=%s: residual=%s", model.name, N, c.label, residual)
    return PoissonSolution(problem, g, g_scaled, w, residual, method, notes)


def poisson_residual(model: SingleBirthModel, c: CoefficientVector, f: FSpec,
                     g: Sequence[float], N: int) -> float:
    """max_{0<=i<N} |(Omega g)_i - f_i| by direct substitution"""
    g = np.asarray(g, dtype=float)
    if len(g) < N + 1:
        raise DomainError(f"g needs at least {N + 1} entries, got {len(g)}")
    fv = f_vector(f, N)
    worst = 0.0
    for i in range(N):
        row = model.row(i)
        value = row.up * (g[i + 1] - g[i]) + c(i) * g[i]
        if len(row.targets):
            value += float(row.rates @ (g[row.targets] - g[i]))
        worst = max(worst, abs(value - fv[i]))
    return worst


def uniqueness_function(model: SingleBirthModel, lam: float, N: int) -> ScaledArray:
    """u_n = 1 + lam * sum_{k<n} m~_k for c = -lam (bounded iff the process is unique)"""
    if not lam > 0:
        raise DomainError("lambda must be positive", lam=lam)
    table = SequenceTable(model, CoefficientVector.killing(lam), N)
    return table.m.exclusive_cumsum() * lam + 1.0


# -- finite state spaces -------------------------------------------------------

@dataclass
class FiniteSolution:
    """Solution on {0..N}; ``status`` is determined, consistent, underdetermined or local"""
    g: Optional[np.ndarray]
    boundary_ok: bool
    g0: Optional[float]
    status: str
    boundary_coefficient: float
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'g': None if self.g is None else [float(x) for x in self.g],
                'boundary_ok': self.boundary_ok, 'g0': self.g0, 'status': self.status,
                'boundary_coefficient': self.boundary_coefficient, 'notes': self.notes}


def _boundary(kappa: float, rhs: float, scale: float, g0: Optional[float],
              where: str) -> (Optional[float], str, List[str]):
    notes: List[str] = []
    if abs(kappa) > BOUNDARY_TOL * scale:
        determined = rhs / kappa
        if g0 is not None and abs(g0 - determined) > BOUNDARY_TOL * max(1.0, abs(determined)):
            notes.append(f"boundary at {where} determines the value {determined!r}; "
                         f"the given {g0!r} is ignored")
        return determined, 'determined', notes
    if abs(rhs) > BOUNDARY_TOL * scale:
        raise DegenerateBoundary(f"boundary equation at {where} reads 0 = {rhs:.6g}",
                                 boundary_rhs=rhs)
    if g0 is None:
        notes.append("boundary equation holds for every value; supply one to pick a solution")
        return None, 'underdetermined', notes
    return g0, 'consistent', notes


def solve_poisson_finite(model: SingleBirthModel, c: CoefficientVector, f: FSpec, N: int,
                         g0: Optional[float] = None, local: bool = False) -> FiniteSolution:
    """Omega g = f on {0..N} for the single birth rows 0..N (q_{N,N+1} unused).

    The boundary row N gives kappa * g0 = R with
    kappa = c_N + sum_k q~_N^(k) wc_k and R = f_N + sum_k q~_N^(k) wf_k, where wf and wc
    are the increments driven by f and by c. With ``local`` only rows 0..N-1 are imposed
    and g0 defaults to 1 (the locally harmonic profile when f = 0).
    """
    if N < 1:
        raise DomainError("a finite state space needs N >= 1")
    model.check_state(N)
    fv = f_vector(f, N)
    cv = c.array(N)
    system = model_system(model, c, N - 1)
    wf = solve_triangular(system.with_rhs(fv[:N]))
    wc = solve_triangular(system.with_rhs(cv[:N]))

    q_tilde_N = partial_row_sums(model, N) - cv[N]
    kappa = float(cv[N] + q_tilde_N @ wc)
    rhs = float(fv[N] + q_tilde_N @ wf)
    scale = 1.0 + abs(cv[N]) + float(np.abs(q_tilde_N) @ (np.abs(wc) + np.abs(wf))) + abs(fv[N])

    if local:
        value = 1.0 if g0 is None else float(g0)
        g = value + np.concatenate([[0.0], np.cumsum(wf - value * wc)])
        ok = abs(kappa * value - rhs) <= 1e-9 * scale
        return FiniteSolution(g, ok, value, 'local', kappa)

    value, status, notes = _boundary(kappa, rhs, scale, g0, f'N={N}')
    if value is None:
        return FiniteSolution(None, True, None, status, kappa, notes)
    g = value + np.concatenate([[0.0], np.cumsum(wf - value * wc)])
    ok = abs(kappa * value - rhs) <= 1e-9 * scale
    for note in notes:
        logger.info(note)
    return FiniteSolution(g, ok, value, status, kappa, notes)


def locally_harmonic_profile(model: SingleBirthModel, c: CoefficientVector, N: int) -> np.ndarray:
    """g with g_0 = 1 and (Omega g)_i = 0 for i < N; nondecreasing when c <= 0"""
    return solve_poisson_finite(model, c, 0.0, N, g0=1.0, local=True).g


def single_death_f_table(sd: SingleDeathModel) -> np.ndarray:
    """F[n, i] = F~_n^(i) for 1 <= n <= i: F~_i^(i) = 1, running downward in n"""
    N = sd.N
    F = np.zeros((N + 1, N + 1))
    q_tilde = {n: sd.upper_partial(n) - sd.c[n] for n in range(N + 1)}
    for i in range(1, N + 1):
        F[i, i] = 1.0
        for n in range(i - 1, 0, -1):
            # q~_n^(k) for k = n+1..i
            F[n, i] = q_tilde[n][:i - n] @ F[n + 1:i + 1, i] / sd.down[n]
    return F


def solve_poisson_single_death_finite(sd: SingleDeathModel, f: FSpec,
                                      gN: Optional[float] = None,
                                      local: bool = False) -> FiniteSolution:
    """Omega g = f for a finite single death matrix; g is anchored at N.

    w_i = g_{i-1} - g_i = sum_{j>=i} F~_i^(j) (f_j - c_j gN) / q_{j,j-1}; the row at 0 gives
    the boundary equation for gN.
    """
    N = sd.N
    fv = f_vector(f, N)
    F = single_death_f_table(sd)
    weights_f = np.zeros(N + 1)
    weights_c = np.zeros(N + 1)
    weights_f[1:] = fv[1:] / sd.down[1:]
    weights_c[1:] = sd.c[1:] / sd.down[1:]
    wf = F @ weights_f
    wc = F @ weights_c
    wf[0] = wc[0] = 0.0

    q_tilde_0 = sd.upper_partial(0) - sd.c[0]
    kappa = float(sd.c[0] + q_tilde_0 @ wc[1:])
    rhs = float(fv[0] + q_tilde_0 @ wf[1:])
    scale = 1.0 + abs(sd.c[0]) + float(np.abs(q_tilde_0) @ (np.abs(wc[1:]) + np.abs(wf[1:]))) + abs(fv[0])

    def profile(value: float) -> np.ndarray:
        w = wf - value * wc
        # g_n = gN + sum_{k=n+1}^N w_k
        tail = np.concatenate([np.cumsum(w[::-1])[::-1][1:], [0.0]])
        return value + tail

    if local:
        value = 1.0 if gN is None else float(gN)
        return FiniteSolution(profile(value), abs(kappa * value - rhs) <= 1e-9 * scale,
                              value, 'local', kappa)
    value, status, notes = _boundary(kappa, rhs, scale, gN, 'state 0')
    if value is None:
        return FiniteSolution(None, True, None, status, kappa, notes)
    return FiniteSolution(profile(value), abs(kappa * value - rhs) <= 1e-9 * scale,
                          value, status, kappa, notes)
