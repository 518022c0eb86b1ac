"""Test: oracle
The test file used for checking the following properties:
   - the exact solutions satisfy their equations
   - the geometric solution follows the Brownian path
   - parameter checks of the oracle selector
   - time-refined references on a fixed grid
"""
import numpy as np
import pytest

from spde_richardson.exceptions import OracleError
from spde_richardson.fields import TrigPolynomial
from spde_richardson.integrator import integrate
from spde_richardson.noise import sample_path
from spde_richardson.oracle import (
    OracleProblem,
    advection_diffusion_solution,
    fine_reference,
    geometric_solution,
    heat_solution,
)
from spde_richardson.problem import DtPolicy, build_preset

# NOTE: Here are some notes for testing
# Naming convention: test_{tcid}_{test title}
# Running just one tcid: python -m pytest -k {tcid}

PSI = TrigPolynomial([(1.0, [1], "sin"), (0.3, [3], "cos")], constant=0.2, period=2.0)


def test_exact01_initial_value():
    x = np.linspace(0.0, 2.0, 17)[:, None]
    np.testing.assert_allclose(heat_solution(1.0, PSI, 0.0, x), PSI(0.0, x), atol=1e-15)
    np.testing.assert_allclose(
        advection_diffusion_solution(0.5, 1.0, -0.2, PSI, 0.0, x), PSI(0.0, x), atol=1e-15
    )


def test_exact02_advection_diffusion_residual():
    a, b, c = 0.3, 0.7, -0.4
    x = np.linspace(0.0, 2.0, 13)[:, None]
    t, dt, dx = 0.2, 1e-5, 1e-4

    def u(s, y):
        return advection_diffusion_solution(a, b, c, PSI, s, y)

    u_t = (u(t + dt, x) - u(t - dt, x)) / (2 * dt)
    u_x = (u(t, x + dx) - u(t, x - dx)) / (2 * dx)
    u_xx = (u(t, x + dx) - 2 * u(t, x) + u(t, x - dx)) / dx**2
    np.testing.assert_allclose(u_t, a * u_xx + b * u_x + c * u(t, x), atol=1e-5)


def test_exact03_two_dimensional_decay_rates():
    a = [[1.0, 0.5], [0.5, 1.0]]
    psi = TrigPolynomial([(1.0, [1, 1], "sin"), (1.0, [1, -1], "sin")], period=1.0)
    t = 0.01
    x = np.array([[0.125, 0.125]])
    # k.a.k is 3 for (1, 1) and 1 for (1, -1).
    first = np.exp(-4 * np.pi**2 * 3 * t) * np.sin(2 * np.pi * 0.25)
    second = np.exp(-4 * np.pi**2 * 1 * t) * np.sin(0.0)
    np.testing.assert_allclose(heat_solution(a, psi, t, x), [first + second], rtol=1e-13)


def test_exact04_geometric_solution_follows_the_path():
    path = sample_path(3, 1.0, 8, 1)
    x = np.linspace(0.0, 2.0, 5)[:, None]
    t = 0.5
    w = path.value_at(t)[0]
    expected = np.exp(0.4 * w - 0.08 * t) * heat_solution(1.0, PSI, t, x)
    np.testing.assert_allclose(geometric_solution(1.0, 0.4, path, PSI, t, x), expected)
    with pytest.raises(OracleError):
        geometric_solution(1.0, 0.4, sample_path(3, 1.0, 8, 2), PSI, t, x)


def test_exact05_matrix_checks():
    x = np.zeros((1, 2))
    psi = TrigPolynomial([(1.0, [1, 0], "sin")], period=1.0)
    with pytest.raises(OracleError):
        heat_solution([[1.0, 0.2], [0.0, 1.0]], psi, 0.1, x)
    with pytest.raises(OracleError):
        heat_solution([[-1.0, 0.0], [0.0, 1.0]], psi, 0.1, x)
    with pytest.raises(OracleError):
        heat_solution(np.eye(3), psi, 0.1, x)


def test_selector01_parameter_checks():
    with pytest.raises(OracleError):
        OracleProblem("spectral", {})
    with pytest.raises(OracleError):
        OracleProblem("heat", {"a": 1.0})
    with pytest.raises(OracleError):
        OracleProblem("heat", {"a": 1.0, "psi": 2.0})
    with pytest.raises(OracleError):
        OracleProblem("fine_reference", {"dt_fine": 0.0})


def test_selector02_evaluate():
    heat = OracleProblem("heat", {"a": 1.0, "psi": PSI.to_dict()})
    assert heat.is_exact
    assert not heat.needs_path
    x = np.array([[0.3]])
    np.testing.assert_allclose(heat.evaluate(0.1, x), heat_solution(1.0, PSI, 0.1, x))
    geometric = OracleProblem("geometric", {"a": 1.0, "nu": 0.5, "psi": PSI})
    assert geometric.needs_path
    with pytest.raises(OracleError):
        geometric.evaluate(0.1, x)
    reference = OracleProblem("fine_reference", {"dt_fine": 1e-4})
    assert not reference.is_exact
    with pytest.raises(OracleError):
        reference.evaluate(0.1, x)
    data = heat.to_dict()
    rebuilt = OracleProblem(data.pop("kind"), data)
    np.testing.assert_array_equal(rebuilt.evaluate(0.1, x), heat.evaluate(0.1, x))


def test_reference01_same_step_gives_the_same_run():
    problem = build_preset("geometric")
    problem.dt_policy = DtPolicy("fixed", steps=64)
    grid = problem.grid(8)
    scheme = problem.scheme_for(grid)
    path = sample_path(5, problem.T, 256, 1)
    direct = integrate(problem.stencil, problem, grid, path, scheme)
    reference = fine_reference(problem, grid, path, scheme.dt, dt=scheme.dt)
    np.testing.assert_array_equal(reference.final.values, direct.final.values)


def test_reference02_refined_step_is_closer_to_the_exact_solution():
    problem = build_preset("geometric")
    problem.dt_policy = DtPolicy("fixed", steps=32)
    grid = problem.grid(8)
    scheme = problem.scheme_for(grid)
    path = sample_path(5, problem.T, 1024, 1)
    coarse = integrate(problem.stencil, problem, grid, path, scheme)
    fine = fine_reference(problem, grid, path, problem.T / 1024, dt=scheme.dt)
    coarser = fine_reference(problem, grid, path, problem.T / 256, dt=scheme.dt)
    # The time error shrinks with dt_fine on a fixed grid.
    assert np.abs(fine.final.flat - coarser.final.flat).max() < np.abs(
        fine.final.flat - coarse.final.flat
    ).max()


def test_reference03_divisibility_checks():
    problem = build_preset("geometric")
    grid = problem.grid(8)
    path = sample_path(5, problem.T, 100, 1)
    with pytest.raises(OracleError):
        fine_reference(problem, grid, path, problem.T / 100, dt=problem.T / 150)
    with pytest.raises(OracleError):
        fine_reference(problem, grid, path, problem.T / 64)
