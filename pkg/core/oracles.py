"""
Independent reference values: dense solves on the truncated chain and closed forms
"""
import logging
import math
from typing import Callable, Tuple

import numpy as np
from scipy import linalg

from .errors import DegenerateBoundary, DomainError
from .model import SingleBirthModel, SingleDeathModel
from .poisson import FSpec, f_vector
from .scaled import ScaledArray
from .sequences import CoefficientVector

logger = logging.getLogger(__name__)


def dense_generator(model: SingleBirthModel, N: int) -> np.ndarray:
    """Conservative generator of the chain restricted to {0..N}; row N loses its up-rate"""
    model.check_state(N)
    Q = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        row = model.row(i)
        if i < N:
            Q[i, i + 1] = row.up
        if len(row.targets):
            Q[i, row.targets] = row.rates
        Q[i, i] = -Q[i].sum()
    return Q


def _solve(A: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    try:
        return linalg.solve(A, b)
    except linalg.LinAlgError as exc:
        raise DegenerateBoundary(f"{what}: dense system is singular ({exc})")


def dense_poisson_solve(model: SingleBirthModel, c: CoefficientVector, f: FSpec, N: int) -> np.ndarray:
    """(Q_N + diag c) g = f by Gaussian elimination"""
    A = dense_generator(model, N) + np.diag(c.array(N))
    return _solve(A, f_vector(f, N), 'dense Poisson solve')


def dense_single_death_solve(sd: SingleDeathModel, f: FSpec) -> np.ndarray:
    A = sd.rate_matrix() + np.diag(sd.c)
    return _solve(A, f_vector(f, sd.N), 'dense single death solve')


def truncated_stationary(model: SingleBirthModel, N: int) -> np.ndarray:
    """Stationary law of the truncated chain: pi Q_N = 0, sum pi = 1"""
    Q = dense_generator(model, N)
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(N + 1)
    b[-1] = 1.0
    pi = _solve(A, b, 'stationary solve')
    if np.any(pi < -1e-12):
        logger.warning("truncated stationary vector has negative entries (min %.3g)", pi.min())
    return pi


def mean_return_time_oracle(model: SingleBirthModel, N: int) -> float:
    """E_0 sigma_0 of the truncated chain, 1/(pi_0 q_0)"""
    pi = truncated_stationary(model, N)
    return 1.0 / (pi[0] * model.total_rate(0))


def dense_mean_hitting_times(model: SingleBirthModel, target: int, N: int) -> np.ndarray:
    """E_n tau_target for n != target; entry ``target`` holds the mean return time"""
    if not 0 <= target <= N:
        raise DomainError(f"target must lie in 0..{N}", target=target)
    Q = dense_generator(model, N)
    keep = [i for i in range(N + 1) if i != target]
    h = np.zeros(N + 1)
    h[keep] = _solve(Q[np.ix_(keep, keep)], -np.ones(N), 'hitting-time solve')
    q_t = -Q[target, target]
    h[target] = (1.0 + Q[target, keep] @ h[keep]) / q_t
    return h


# -- closed forms ------------------------------------------------------------------

def uniform_catastrophe_F0(a: float, b: float, N: int, c: float = 0.0) -> ScaledArray:
    """F~_n^(0) for q_{n,n+1} = nb, q_{nj} = a (j < n), n >= 1, with constant c < a.

    F~_n = ((a - c)/(nb)) prod_{k=1}^{n-1} (1 + ((k+1)a - c)/(kb))
    """
    if not a - c > 0:
        raise DomainError("the closed form needs c < a", a=a, c=c)
    logs = np.zeros(N + 1)
    acc = 0.0
    for n in range(1, N + 1):
        logs[n] = math.log(a - c) - math.log(n * b) + acc
        acc += math.log1p(((n + 1) * a - c) / (n * b))
    return ScaledArray(np.ones(N + 1), logs)


def uniform_catastrophe_d(a: float, b: float, N: int, c: float = 0.0) -> ScaledArray:
    """d~_n = F~_n^(0) / (a - c) for n >= 1, d~_0 = 0"""
    F = uniform_catastrophe_F0(a, b, N, c)
    d = ScaledArray(F.sign, F.log - math.log(a - c))
    d.sign[0] = 0
    d.log[0] = -np.inf
    return d


def uniform_catastrophe_laplace(a: float, q01: float, lam: float) -> Tuple[float, float]:
    """(E_0 e^{-lam sigma_0}, E_n e^{-lam sigma_0} for n >= 1); independent of b"""
    return a * q01 / ((a + lam) * (q01 + lam)), a / (a + lam)


def uniform_catastrophe_exp_moment(a: float, q01: float, lam: float) -> Tuple[float, float]:
    """(E_0 e^{lam sigma_0}, E_n e^{lam sigma_0} for n >= 1) for lam < min(a, q01)"""
    if not lam < min(a, q01):
        raise DomainError("the exponential moment is finite only for lambda < min(a, q01)", lam=lam)
    return a * q01 / ((a - lam) * (q01 - lam)), a / (a - lam)


def constant_column_m(q10: float, up: Callable[[int], float], N: int, c: float = 0.0) -> ScaledArray:
    """m~_n = (1/q_{n,n+1}) prod_{k<n} (1 + (q10 - c)/q_{k,k+1}) for constant q_{n0} = q10"""
    logs = np.zeros(N + 1)
    acc = 0.0
    for n in range(N + 1):
        logs[n] = acc - math.log(up(n))
        acc += math.log1p((q10 - c) / up(n))
    return ScaledArray(np.ones(N + 1), logs)


def constant_column_F0(q10: float, up: Callable[[int], float], N: int, c: float = 0.0) -> ScaledArray:
    """F~_n^(0) = ((q10 - c)/q_{n,n+1}) prod_{k=1}^{n-1} (1 + (q10 - c)/q_{k,k+1}), F~_0 = 1"""
    logs = np.zeros(N + 1)
    acc = 0.0
    for n in range(1, N + 1):
        logs[n] = math.log(q10 - c) - math.log(up(n)) + acc
        acc += math.log1p((q10 - c) / up(n))
    return ScaledArray(np.ones(N + 1), logs)


def constant_column_kappa_prime(q10: float, up: Callable[[int], float], n: int) -> float:
    """n (q_{n+1,n+2} - q_{n,n+1} - q10)/(q_{n,n+1} + q10); its limit decides explosion (> 1)"""
    return n * (up(n + 1) - up(n) - q10) / (up(n) + q10)


def birth_death_1_2(n: int) -> Tuple[int, int, int]:
    """(F_n, m_n, d_n) = (2^n, 2^{n+1} - 1, 2^n - 1) for up = 1, down = 2"""
    return 2 ** n, 2 ** (n + 1) - 1, 2 ** n - 1


def two_state_return_mean(q01: float, q10: float) -> float:
    return 1.0 / q01 + 1.0 / q10


def mz_constant_column_inner_diverges(b: float) -> bool:
    """For q_{n,n+1} = b(n+1), q10 = 1: sum 1/(q F) behaves like sum n^{-1/b}"""
    if b <= 0:
        raise DomainError("b must be positive", b=b)
    return b >= 1.0
