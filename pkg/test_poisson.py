"""
Tests for the triangular-system machinery and the Poisson solvers
"""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from core.errors import DomainError, StructureError
from core.model import build_tabulated, model_birth_death
from core.oracles import dense_poisson_solve, dense_single_death_solve
from core.poisson import (PoissonProblem, TriangularSystem, gamma_comparison_gap, gamma_dual_matrix,
                          gamma_matrix, gamma_table, locally_harmonic_profile, model_system,
                          poisson_residual, problem_preset, solve_poisson, solve_poisson_finite,
                          solve_poisson_single_death_finite, solve_triangular, uniqueness_function)
from core.reproduce import random_rows, random_single_death
from core.sequences import CoefficientVector, SequenceTable


def _random_system(rng, size):
    alpha = np.tril(rng.uniform(0.0, 1.0, size=(size, size)), k=-1)
    return TriangularSystem(alpha, rng.uniform(0.0, 1.0, size=size), rng.uniform(0.5, 2.0, size=size))


# -- triangular systems ------------------------------------------------------------

@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=2, max_value=25))
def test_gamma_representation_solves_the_system(seed, size):
    system = _random_system(np.random.default_rng(seed), size)
    forward = solve_triangular(system)
    via_gamma = solve_triangular(system, via='gamma')
    assert np.allclose(forward, via_gamma, rtol=1e-10, atol=1e-12)


@given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=2, max_value=25))
def test_gamma_comparison_inequality(seed, size):
    G = gamma_matrix(_random_system(np.random.default_rng(seed), size))
    assert gamma_comparison_gap(G) >= -1e-12 * max(1.0, float(G.max()))


def test_gamma_dual_form_matches():
    system = _random_system(np.random.default_rng(3), 12)
    assert np.allclose(gamma_matrix(system), gamma_dual_matrix(system), rtol=1e-12)
    assert np.allclose(gamma_table(system.alpha, system.beta, 4, 11), gamma_matrix(system)[4:, 4])


def test_triangular_system_validation():
    with pytest.raises(StructureError):
        TriangularSystem(np.ones((3, 3)), np.zeros(3))
    with pytest.raises(StructureError):
        TriangularSystem(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(StructureError):
        TriangularSystem(np.zeros((2, 2)), np.zeros(2), np.array([1.0, 0.0]))


def test_model_system_gamma_is_F_table(uc11):
    N = 12
    system = model_system(uc11, CoefficientVector.zero(), N)
    G = gamma_matrix(system)
    table = SequenceTable(uc11, None, N, columns='all')
    for k in range(N + 1):
        assert np.allclose(G[k:, k], table.column(k).to_floats()[k:], rtol=1e-12)


# -- Poisson equation on Z_+ ----------------------------------------------------------

def test_constants_are_harmonic(uc11):
    solution = solve_poisson(PoissonProblem(uc11, CoefficientVector.zero(), 0.0, 5.0, 100))
    assert solution.g == pytest.approx(np.full(101, 5.0), rel=1e-14)
    assert solution.residual <= 1e-12


def test_g0_is_kept_exactly(bd12):
    solution = solve_poisson(PoissonProblem(bd12, CoefficientVector.killing(0.1), 'i', 0.3, 50))
    assert solution.g[0] == 0.3
    assert solution.g0 == 0.3


@given(st.integers(min_value=0, max_value=10_000))
def test_residual_property(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(5, 60))
    model = build_tabulated(random_rows(rng, N))
    c = CoefficientVector(-rng.uniform(0.0, 0.02, size=N + 1))
    f = rng.uniform(-1.0, 1.0, size=N + 1)
    solution = solve_poisson(PoissonProblem(model, c, f, float(rng.uniform(-1, 1)), N))
    assert solution.residual is not None
    assert solution.residual <= 1e-9 * (1.0 + np.max(np.abs(f)))


def test_explicit_and_recursive_routes_agree(random_model):
    model = random_model(7, 30)
    c = CoefficientVector.killing(0.05)
    f = np.linspace(-1.0, 1.0, 31)
    recursive = solve_poisson(PoissonProblem(model, c, f, 0.5, 30))
    explicit = solve_poisson(PoissonProblem(model, c, f, 0.5, 30), method='explicit')
    assert np.allclose(recursive.g, explicit.g, rtol=1e-10, atol=1e-12)


def test_residual_detects_corruption(random_model):
    N = 30
    model = random_model(2, N)
    c = CoefficientVector.killing(0.01)
    solution = solve_poisson(PoissonProblem(model, c, 'i/10', 1.0, N))
    g = solution.g.copy()
    g[13] += 1.0
    assert poisson_residual(model, c, 'i/10', g, N) >= 0.999 * model.up_rates(N).min()


def test_uniqueness_function_is_increasing(uc11, explosive):
    for model in (uc11, explosive):
        u = uniqueness_function(model, 1.0, 200).to_floats()
        assert u[0] == pytest.approx(1.0)
        assert np.all(np.diff(u) > 0)
    # bounded for the explosive model, unbounded growth otherwise
    assert uniqueness_function(explosive, 1.0, 400).to_floats()[-1] < 20.0
    assert uniqueness_function(uc11, 1.0, 400).to_floats()[-1] > 100.0


def test_problem_presets(bd12):
    c, f = problem_preset('recurrence', bd12, 5)
    assert c.is_zero
    assert f.tolist() == [0.0, 2.0, 0.0, 0.0, 0.0, 0.0]
    c, f = problem_preset('ergodicity', bd12, 3, g0=2.0)
    assert f.tolist() == [-1.0, 3.0, -1.0, -1.0]
    c, f = problem_preset('laplace', bd12, 3, lam=0.5, g0=0.5)
    assert c(0) == -0.5
    assert f.tolist() == [0.0, -1.0, 0.0, 0.0]
    with pytest.raises(DomainError):
        problem_preset('uniqueness', bd12, 3)
    with pytest.raises(DomainError):
        problem_preset('nonsense', bd12, 3)


def test_closed_form_for_unit_source(bd12):
    # up 1, down 2, Qg = -1 from row 0 on: w_n = -m_n = -(2^{n+1} - 1)
    solution = solve_poisson(PoissonProblem(bd12, CoefficientVector.zero(), -1.0, 0.0, 40))
    n = np.arange(41)
    assert solution.w.to_floats() == pytest.approx(-(2.0 ** (n + 1) - 1), rel=1e-12)
    assert solution.g == pytest.approx(-(2.0 ** (n + 1) - 2 - n), rel=1e-12, abs=1e-12)


# -- finite state spaces ------------------------------------------------------------

@pytest.mark.parametrize('seed', range(20))
def test_finite_single_birth_matches_dense(seed):
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 21))
    model = build_tabulated(random_rows(rng, N))
    cv = -rng.uniform(0.0, 0.5, size=N + 1) * (rng.random(N + 1) < 0.5)
    cv[int(rng.integers(0, N + 1))] = -rng.uniform(0.1, 0.5)
    c = CoefficientVector(cv)
    f = rng.uniform(-1.0, 1.0, size=N + 1)
    ours = solve_poisson_finite(model, c, f, N)
    dense = dense_poisson_solve(model, c, f, N)
    assert ours.status == 'determined'
    assert ours.boundary_ok
    assert np.allclose(ours.g, dense, rtol=1e-9, atol=1e-10)
    assert np.all(solve_poisson_finite(model, c, 0.0, N).g == 0.0)


@pytest.mark.parametrize('seed', range(20))
def test_finite_single_death_matches_dense(seed):
    rng = np.random.default_rng(100 + seed)
    N = int(rng.integers(2, 21))
    sd = random_single_death(rng, N)
    f = rng.uniform(-1.0, 1.0, size=N + 1)
    ours = solve_poisson_single_death_finite(sd, f)
    assert ours.status == 'determined'
    assert np.allclose(ours.g, dense_single_death_solve(sd, f), rtol=1e-9, atol=1e-10)
    assert np.all(solve_poisson_single_death_finite(sd, 0.0).g == 0.0)


def test_finite_conservative_constant():
    model = model_birth_death(1.0, 2.0)
    solution = solve_poisson_finite(model, CoefficientVector.zero(), 0.0, 10, g0=3.0)
    assert solution.status == 'consistent'
    assert np.allclose(solution.g, 3.0)
    underdetermined = solve_poisson_finite(model, CoefficientVector.zero(), 0.0, 10)
    assert underdetermined.status == 'underdetermined'
    assert underdetermined.g is None


def test_locally_harmonic_profile_nondecreasing(random_model):
    g = locally_harmonic_profile(random_model(5, 20), CoefficientVector.killing(0.3), 20)
    assert g[0] == 1.0
    assert np.all(np.diff(g) >= 0)
