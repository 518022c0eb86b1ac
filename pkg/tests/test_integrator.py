"""Test: integrator
The test file used for checking the following properties:
   - explicit and drift-implicit steps against hand computations
   - the CFL guard of explicit stepping
   - conservation of mass by the deterministic scheme
   - convergence to the exact heat solution
   - the time order of the degenerate multiplicative problem
   - nonnegativity and the discrete max principle
   - first-order agreement of the two steppers and the scalar recursions
"""
from dataclasses import replace

import numpy as np
import pytest

import spde_richardson.settings as settings
from spde_richardson.configure_numerics import configure_numerics
from spde_richardson.exceptions import CflError, ConfigError, IntegrationError
from spde_richardson.fields import TrigPolynomial
from spde_richardson.grid import GridFunction, TorusGrid, apply_Lh, lp_norm
from spde_richardson.integrator import (
    EXPLICIT,
    IMPLICIT,
    Integrator,
    SchemeConfig,
    Trajectory,
    cfl_margin,
    integrate,
    step_drift_implicit,
    step_explicit,
)
from spde_richardson.noise import coarsen_path, sample_path
from spde_richardson.problem import DtPolicy, build_preset
from spde_richardson.stencil import PdeCoefficients, build_diagonal_stencil

from .utils import observed_order

# NOTE: Here are some notes for testing
# Naming convention: test_{tcid}_{test title}
# Running just one tcid: python -m pytest -k {tcid}


def _run(problem, n, method=None, seed=0, record_times=None, replicate=0):
    grid = problem.grid(n)
    scheme = problem.scheme_for(grid, method)
    path = sample_path(seed, problem.T, scheme.steps(problem.T), problem.R, replicate)
    return integrate(problem.stencil, problem, grid, path, scheme, record_times), path


def test_scheme01_step_count():
    assert SchemeConfig(EXPLICIT, 0.25).steps(1.0) == 4
    with pytest.raises(ConfigError):
        SchemeConfig(EXPLICIT, 0.3).steps(1.0)
    with pytest.raises(ConfigError):
        SchemeConfig("rk4", 0.1)


def test_step01_explicit_matches_hand_computation():
    problem = build_preset("geometric")
    grid = TorusGrid(1, 8)
    x = grid.points()[:, 0]
    u = GridFunction(grid, np.sin(2 * np.pi * x))
    dt, dw = 1e-4, 0.03
    out = step_explicit(problem.stencil, 0.0, u, dt, [dw])
    expected = u.flat + dt * apply_Lh(problem.stencil, 0.0, u).flat + 0.5 * u.flat * dw
    np.testing.assert_allclose(out.flat, expected, rtol=1e-14, atol=1e-15)


def test_step02_implicit_solves_the_linear_system():
    problem = build_preset("heat")
    grid = TorusGrid(1, 16)
    x = grid.points()[:, 0]
    u = GridFunction(grid, np.cos(2 * np.pi * x))
    dt = 0.01
    out = step_drift_implicit(problem.stencil, 0.0, u, dt, [])
    residual = out.flat - dt * apply_Lh(problem.stencil, dt, out).flat - u.flat
    assert np.abs(residual).max() <= 1e-10


def test_step03_gmres_agrees_with_direct():
    problem = build_preset("variable")
    direct, _ = _run(problem, 16, IMPLICIT)
    configure_numerics(implicit_solver="gmres", implicit_tol=1e-13)
    assert settings.IMPLICIT_SOLVER == "gmres"
    iterative, _ = _run(problem, 16, IMPLICIT)
    np.testing.assert_allclose(iterative.final.flat, direct.final.flat, atol=1e-9)


def test_cfl01_explicit_step_refused():
    problem = build_preset("heat")
    grid = problem.grid(32)
    scheme = SchemeConfig(EXPLICIT, problem.T / 10)
    assert cfl_margin(problem.stencil, grid, scheme.dt) > settings.CFL_LIMIT
    path = sample_path(0, problem.T, 10, 0)
    with pytest.raises(CflError) as excinfo:
        integrate(problem.stencil, problem, grid, path, scheme)
    assert excinfo.value.step == 0


def test_cfl02_implicit_ignores_the_margin():
    problem = build_preset("heat")
    grid = problem.grid(32)
    scheme = SchemeConfig(IMPLICIT, problem.T / 10, cfl_check=False)
    path = sample_path(0, problem.T, 10, 0)
    trajectory = integrate(problem.stencil, problem, grid, path, scheme)
    assert trajectory.manifest["cfl_margin"] > 1.0
    assert np.all(np.isfinite(trajectory.final.flat))


def test_path01_coarsened_path_gives_the_same_run():
    problem = build_preset("geometric")
    problem.dt_policy = DtPolicy("fixed", steps=256)
    grid = problem.grid(8)
    scheme = problem.scheme_for(grid)
    fine = sample_path(3, problem.T, 1024, 1)
    first = integrate(problem.stencil, problem, grid, fine, scheme)
    second = integrate(problem.stencil, problem, grid, coarsen_path(fine, 4), scheme)
    np.testing.assert_array_equal(first.final.values, second.final.values)
    with pytest.raises(IntegrationError):
        integrate(problem.stencil, problem, grid, sample_path(3, problem.T, 100, 1), scheme)


def test_mass01_deterministic_mass_is_conserved():
    problem = build_preset("upwind")
    grid = problem.grid(32)
    steps = problem.steps_for(32)
    times = [problem.T * j / 4 for j in range(5)]
    for method in (EXPLICIT, IMPLICIT):
        trajectory, _ = _run(problem, 32, method, record_times=times)
        masses = [float(np.sum(s.values)) * grid.h for s in trajectory.states]
        scale = lp_norm(trajectory.states[0], 1.0)
        assert np.ptp(masses) <= 1e-12 * max(scale, 1.0) * steps ** 0.5


def test_trajectory01_records_and_frame():
    problem = build_preset("heat")
    times = [0.0, problem.T / 2, problem.T]
    trajectory, _ = _run(problem, 8, record_times=times)
    assert trajectory.times == times
    frame = trajectory.to_frame()
    assert list(frame.columns) == ["t", "x_1", "value"]
    assert len(frame) == 3 * 8
    np.testing.assert_allclose(
        trajectory.state_at(0.0).flat, problem.coefficients.psi_at(trajectory.grid.points())
    )
    assert trajectory.manifest["method"] == EXPLICIT
    with pytest.raises(IntegrationError):
        _run(problem, 8, record_times=[problem.T / 3.7])


def test_trajectory02_zero_data_stays_zero():
    problem = build_preset("zero")
    trajectory, _ = _run(problem, 8)
    assert np.all(trajectory.final.values == 0.0)


def test_hooks01_integrator_subclass_sees_every_step():
    seen = []

    class Recording(Integrator):
        def after_step(self, n, t, u):
            seen.append(n)

    problem = build_preset("heat")
    grid = problem.grid(8)
    scheme = problem.scheme_for(grid)
    steps = scheme.steps(problem.T)
    integrate(
        problem.stencil, problem, grid, sample_path(0, problem.T, steps, 0), scheme,
        integrator_class=Recording,
    )
    assert seen == list(range(steps))


def test_order01_heat_converges_at_second_order():
    problem = build_preset("heat")
    ns = [16, 32, 64, 128]
    errors = []
    for n in ns:
        trajectory, _ = _run(problem, n)
        exact = problem.oracle.evaluate(problem.T, trajectory.grid.points())
        errors.append(float(np.abs(trajectory.final.flat - exact).max()))
    order = observed_order([problem.period / n for n in ns], errors)
    assert 1.8 <= order <= 2.2


def test_order02_degenerate_time_order():
    problem = build_preset("degenerate")
    grid = problem.grid(8)
    points = grid.points()
    step_counts = [32, 64, 128, 256]
    replicates = 32
    master = max(step_counts) * 4
    squared = np.zeros(len(step_counts))
    for replicate in range(replicates):
        path = sample_path(17, problem.T, master, 1, replicate)
        exact = problem.oracle.evaluate(problem.T, points, path)
        for i, steps in enumerate(step_counts):
            scheme = SchemeConfig(EXPLICIT, problem.T / steps)
            trajectory = integrate(problem.stencil, problem, grid, path, scheme)
            squared[i] += np.max((trajectory.final.flat - exact) ** 2) / replicates
    dts = [problem.T / steps for steps in step_counts]
    slope = observed_order(dts, np.sqrt(squared))
    # Euler-Maruyama is strong order 1/2 for multiplicative noise.
    assert 0.2 <= slope <= 0.8


def test_order03_weak_mean_matches_heat_solution():
    problem = build_preset("geometric")
    problem.dt_policy = DtPolicy("fixed", steps=64)
    grid = problem.grid(8)
    scheme = problem.scheme_for(grid)
    # The mean of the scheme solves the deterministic scheme with the same dt.
    heat = replace(
        problem,
        coefficients=PdeCoefficients(d=1, a=1.0, psi=problem.coefficients.psi),
        stencil=build_diagonal_stencil([1.0], [0.0], 0.0, [0.0]),
        oracle=None,
    )
    expected = integrate(
        heat.stencil, heat, grid, sample_path(0, problem.T, 64, 0), heat.scheme_for(grid)
    ).final.flat

    finals = np.array(
        [
            integrate(
                problem.stencil, problem, grid, sample_path(23, problem.T, 64, 1, r), scheme
            ).final.flat
            for r in range(1000)
        ]
    )
    mean = finals.mean(axis=0)
    stderr = finals.std(axis=0, ddof=1) / np.sqrt(finals.shape[0])
    assert np.all(np.abs(mean - expected) <= 3 * stderr + 1e-12)


def _upwind_with(psi):
    problem = build_preset("upwind")
    a, b = 0.05, 0.5
    return replace(
        problem,
        coefficients=PdeCoefficients(d=1, a=a, b=b, psi=psi),
        oracle=None,
    )


def test_positive01_nonnegative_data_stays_nonnegative():
    # 1 + sin(2 pi x) vanishes at the grid point x = 3/4.
    psi = TrigPolynomial([(1.0, [1], "sin")], constant=1.0, period=1.0)
    problem = _upwind_with(psi)
    times = [problem.T * j / 8 for j in range(9)]
    explicit, _ = _run(problem, 32, EXPLICIT, record_times=times)
    implicit, _ = _run(problem, 32, IMPLICIT, record_times=times)
    assert min(float(s.values.min()) for s in explicit.states) >= -1e-14
    assert min(float(s.values.min()) for s in implicit.states) >= -1e-13


def test_positive02_implicit_max_principle_at_large_steps():
    psi = TrigPolynomial([(1.0, [1], "sin"), (0.3, [3], "cos")], period=1.0)
    problem = _upwind_with(psi)
    grid = problem.grid(32)
    steps = 4
    scheme = SchemeConfig(IMPLICIT, problem.T / steps, cfl_check=False)
    assert cfl_margin(problem.stencil, grid, scheme.dt) > 1.0
    times = [problem.T * j / steps for j in range(steps + 1)]
    trajectory = integrate(
        problem.stencil, problem, grid, sample_path(0, problem.T, steps, 0), scheme, times
    )
    highs = [float(s.values.max()) for s in trajectory.states]
    lows = [float(s.values.min()) for s in trajectory.states]
    assert all(b <= a + 1e-13 for a, b in zip(highs, highs[1:]))
    assert all(b >= a - 1e-13 for a, b in zip(lows, lows[1:]))


def test_methods01_explicit_and_implicit_agree_at_first_order():
    problem = build_preset("heat")
    grid = problem.grid(16)
    path = sample_path(0, problem.T, 800, 0)
    step_counts = [100, 200, 400, 800]
    gaps = []
    for steps in step_counts:
        dt = problem.T / steps
        explicit = integrate(problem.stencil, problem, grid, path, SchemeConfig(EXPLICIT, dt))
        implicit = integrate(
            problem.stencil, problem, grid, path, SchemeConfig(IMPLICIT, dt, cfl_check=False)
        )
        gaps.append(float(np.abs(explicit.final.flat - implicit.final.flat).max()))
    slope = observed_order([problem.T / steps for steps in step_counts], gaps)
    assert 0.9 <= slope <= 1.1


def test_scalar01_reaction_recursions():
    c, dt, steps = -0.7, 0.01, 50
    stencil = build_diagonal_stencil([0.0], [0.0], c, [0.0])
    grid = TorusGrid(1, 8)
    x = grid.points()[:, 0]
    u0 = GridFunction(grid, 1.0 + np.sin(2 * np.pi * x))
    explicit, implicit = u0, u0
    for n in range(steps):
        explicit = step_explicit(stencil, n * dt, explicit, dt, [])
        implicit = step_drift_implicit(stencil, n * dt, implicit, dt, [])
    np.testing.assert_allclose(explicit.flat, (1 + c * dt) ** steps * u0.flat, rtol=1e-12)
    np.testing.assert_allclose(implicit.flat, (1 - dt * c) ** -steps * u0.flat, rtol=1e-12)


def test_trajectory03_rejects_mixed_grids():
    states = [GridFunction(TorusGrid(1, 4), np.zeros(4)), GridFunction(TorusGrid(1, 8), np.zeros(8))]
    with pytest.raises(IntegrationError):
        Trajectory([0.0, 1.0], states)
