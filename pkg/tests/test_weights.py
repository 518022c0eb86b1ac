"""Test: weights
The test file used for checking the following properties:
   - the polynomial weight and its gradient
   - the conjugation identity of the weighted stencil
   - the search for an admissible weight scaling
   - weighted and direct integrations agree pathwise
"""
from dataclasses import replace

import numpy as np
import pytest

from spde_richardson.exceptions import ConfigError, StencilError
from spde_richardson.grid import GridFunction, TorusGrid, apply_Lh
from spde_richardson.integrator import EXPLICIT, IMPLICIT, integrate
from spde_richardson.noise import sample_path
from spde_richardson.problem import build_preset
from spde_richardson.stencil import (
    StencilSample,
    build_diagdom_stencil,
    build_explicit_stencil,
    check_lower_bound_p,
    stencil_from_dict,
    stencil_to_dict,
)
from spde_richardson.weights import (
    WeightSpec,
    choose_epsilon,
    rho,
    rho_gradient,
    transform_stencil,
    unweight,
    weight_on_grid,
    weighted_problem,
)

# NOTE: Here are some notes for testing
# Naming convention: test_{tcid}_{test title}
# Running just one tcid: python -m pytest -k {tcid}


def test_rho01_values():
    w = WeightSpec(s_bar=2.0, epsilon=1.0)
    assert rho(w, [0.0]) == 1.0
    assert rho(w, [1.0]) == pytest.approx(0.5)
    assert rho(WeightSpec(2.0, 0.0), [5.0, 3.0]) == 1.0
    np.testing.assert_allclose(rho(w, np.array([[1.0], [3.0]])), [0.5, 0.1])
    # On a torus the centered representative is used.
    assert rho(w, [0.9], period=1.0) == pytest.approx(rho(w, [-0.1]))


def test_rho02_gradient_matches_difference_quotient():
    w = WeightSpec(s_bar=3.0, epsilon=0.7)
    x = np.random.default_rng(0).uniform(-2.0, 2.0, size=(20, 2))
    step = 1e-6
    for i in range(2):
        e = np.eye(2)[i]
        quotient = (rho(w, x + step * e) - rho(w, x - step * e)) / (2 * step)
        np.testing.assert_allclose(rho_gradient(w, x)[:, i], quotient, rtol=1e-6, atol=1e-9)


def test_spec01_rejects_negative_parameters():
    with pytest.raises(ConfigError):
        WeightSpec(s_bar=-1.0)
    with pytest.raises(ConfigError):
        WeightSpec(epsilon=-0.1)


@pytest.mark.parametrize("preset", ["variable", "upwind", "anisotropic"])
def test_conjugation01_identity_on_random_inputs(preset):
    problem = build_preset(preset)
    rng = np.random.default_rng(1)
    grid = problem.grid(16)
    w = WeightSpec(s_bar=2.0, epsilon=0.8)
    weighted = transform_stencil(problem.stencil, w, grid.h, period=problem.period)
    weight = weight_on_grid(w, grid)
    for trial in range(10):
        t = float(rng.uniform(0.0, problem.T))
        u = GridFunction(grid, rng.normal(size=grid.shape))
        left = apply_Lh(weighted, t, u * weight).values
        right = (apply_Lh(problem.stencil, t, u) * weight).values
        scale = np.abs(right).max()
        assert np.abs(left - right).max() <= 1e-11 * scale


def test_conjugation02_zero_scaling_is_the_identity():
    problem = build_preset("upwind")
    grid = problem.grid(16)
    weighted = transform_stencil(problem.stencil, WeightSpec(2.0, 0.0), grid.h, problem.period)
    x = grid.points()
    for vec in problem.stencil.lambda1:
        np.testing.assert_allclose(
            weighted.p_coeff(0.0, x, grid.h, vec), problem.stencil.p_coeff(0.0, x, grid.h, vec)
        )
        np.testing.assert_allclose(
            weighted.c_coeff(0.0, x, grid.h, vec),
            problem.stencil.c_coeff(0.0, x, grid.h, vec),
            atol=1e-14,
        )
    assert weighted.a_coeff is problem.stencil.a_coeff


def test_conjugation03_preconditions():
    lopsided = build_explicit_stencil([[1]], [[0], [1]], {(1,): 1.0}, {}, {})
    with pytest.raises(StencilError):
        transform_stencil(lopsided, WeightSpec(), 0.1)
    spec = build_preset("heat").stencil
    with pytest.raises(StencilError):
        transform_stencil(spec, WeightSpec(2.0, 1.0), 0.0)


def test_conjugation04_config_round_trip():
    problem = build_preset("upwind")
    h = 1.0 / 16
    weighted = transform_stencil(problem.stencil, WeightSpec(2.0, 0.5), h, problem.period)
    data = stencil_to_dict(weighted)
    assert data["constructor"] == "weighted"
    rebuilt = stencil_from_dict(data)
    x = problem.grid(16).points()
    for vec in weighted.lambda1:
        np.testing.assert_array_equal(
            rebuilt.p_coeff(0.0, x, h, vec), weighted.p_coeff(0.0, x, h, vec)
        )
    assert rebuilt.tags["epsilon"] == 0.5


def test_epsilon01_certified_search():
    problem = build_preset("upwind")
    h_max = problem.period / 32
    certificate = choose_epsilon(
        problem.stencil, WeightSpec(s_bar=2.0), kappa=0.25, h_max=h_max, period=problem.period
    )
    assert 0 < certificate.epsilon <= 1.0
    assert certificate.min_p >= 0.0
    assert certificate.tries >= 1
    weighted = transform_stencil(
        problem.stencil, WeightSpec(2.0, certificate.epsilon), h_max, problem.period
    )
    certified = StencilSample(certificate.times, certificate.points, certificate.meshes)
    assert check_lower_bound_p(weighted, 0.0, certified)
    assert "epsilon" in str(certificate)


def test_epsilon02_needs_a_margin():
    problem = build_preset("upwind")
    with pytest.raises(StencilError):
        choose_epsilon(problem.stencil, WeightSpec(), kappa=0.0, h_max=0.1, period=1.0)
    heat = build_preset("heat")
    with pytest.raises(StencilError):
        choose_epsilon(heat.stencil, WeightSpec(), kappa=0.1, h_max=0.1, period=1.0)


def test_epsilon03_diagdom_margin():
    spec = build_diagdom_stencil([[1.0, 0.2], [0.2, 1.0]], [0.4, -0.3], 0.0, kappa=0.3)
    certificate = choose_epsilon(spec, WeightSpec(s_bar=4.0), kappa=0.3, h_max=0.125, period=1.0)
    assert certificate.min_p >= 0.0


@pytest.mark.parametrize("method", [EXPLICIT, IMPLICIT])
def test_pathwise01_weighted_run_matches_direct_run(method):
    problem = replace(build_preset("variable"), method=method)
    grid = problem.grid(16)
    w = WeightSpec(s_bar=2.0, epsilon=0.5)
    scheme = problem.scheme_for(grid)
    path = sample_path(4, problem.T, scheme.steps(problem.T), problem.R)
    times = [problem.T / 2, problem.T]
    direct = integrate(problem.stencil, problem, grid, path, scheme, times)
    conjugated = weighted_problem(problem, w, grid.h)
    assert conjugated.oracle is None
    assert conjugated.name == "variable:weighted"
    weighted = unweight(
        integrate(conjugated.stencil, conjugated, grid, path, scheme, times), w
    )
    for left, right in zip(weighted.states, direct.states):
        scale = np.abs(right.values).max()
        assert np.abs(left.values - right.values).max() <= 1e-9 * scale


def test_grid01_weight_on_grid_is_positive():
    w = WeightSpec(s_bar=6.0, epsilon=2.0)
    weight = weight_on_grid(w, TorusGrid(2, 8, 4.0))
    assert weight.values.min() > 0.0
    assert weight.values.max() == 1.0
