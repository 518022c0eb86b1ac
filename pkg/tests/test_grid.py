"""Test: grid
The test file used for checking the following properties:
   - shift and difference operators on the torus
   - the exact algebraic identities of the difference operators
   - the matrix form of L^h against the term-by-term form
   - discrete norms and restriction to coarser grids
"""
import numpy as np
import pytest

from spde_richardson.exceptions import GridError
from spde_richardson.grid import (
    GridFunction,
    TorusGrid,
    apply_Lh,
    assemble_Lh,
    delta,
    lp_norm,
    restrict,
    shift,
    sup_norm,
    w1_norm,
)
from spde_richardson.stencil import StencilVector, build_diagdom_stencil, build_diagonal_stencil

# NOTE: Here are some notes for testing
# Naming convention: test_{tcid}_{test title}
# Running just one tcid: python -m pytest -k {tcid}

N_INSTANCES = 100


def _instances(seed=0, n=32, d=2):
    rng = np.random.default_rng(seed)
    grid = TorusGrid(d, n, 1.0)
    for _ in range(N_INSTANCES):
        u = GridFunction(grid, rng.normal(size=grid.shape))
        v = GridFunction(grid, rng.normal(size=grid.shape))
        vector = StencilVector(tuple(int(c) for c in rng.integers(-2, 3, size=d)))
        if vector.is_zero:
            vector = StencilVector.unit(0, d)
        yield grid, u, v, vector


def _inner(u, v):
    return float(np.sum(u.values * v.values) * u.grid.h**u.grid.d)


def test_torus01_points_and_mesh():
    grid = TorusGrid(2, 4, 2.0)
    assert grid.h == 0.5
    assert grid.size == 16
    points = grid.points()
    assert points.shape == (16, 2)
    np.testing.assert_array_equal(points[1], [0.0, 0.5])
    np.testing.assert_array_equal(points[4], [0.5, 0.0])
    with pytest.raises(GridError):
        TorusGrid(1, 0)


def test_shift01_wraps_around():
    grid = TorusGrid(1, 4)
    u = GridFunction(grid, [0.0, 1.0, 2.0, 3.0])
    np.testing.assert_array_equal(shift(u, [1]).values, [1.0, 2.0, 3.0, 0.0])
    np.testing.assert_array_equal(shift(u, [-1]).values, [3.0, 0.0, 1.0, 2.0])


def test_shift02_reach_guard():
    u = GridFunction(TorusGrid(1, 4), np.zeros(4))
    with pytest.raises(GridError):
        shift(u, [2])


def test_delta01_mesh_mismatch():
    u = GridFunction(TorusGrid(1, 8), np.zeros(8))
    with pytest.raises(GridError):
        delta(u, [1], 0.5)
    with pytest.raises(GridError):
        delta(u, [1], 0.0)


def test_identity01_summation_by_parts():
    for grid, u, v, vector in _instances(seed=1):
        h = grid.h
        left = _inner(v, delta(u, vector, h))
        right = _inner(delta(v, -vector, h), u)
        right_minus = -_inner(delta(v, vector, -h), u)
        scale = lp_norm(u) * lp_norm(v) / h
        assert abs(left - right) <= 1e-12 * scale
        assert abs(left - right_minus) <= 1e-12 * scale


def test_identity02_discrete_leibniz():
    for grid, u, v, vector in _instances(seed=2):
        h = grid.h
        left = delta(u * v, vector, h).values
        right = (u * delta(v, vector, h) + delta(u, vector, h) * shift(v, vector)).values
        scale = np.abs(u.values).max() * np.abs(v.values).max() / h
        assert np.abs(left - right).max() <= 1e-12 * scale


def test_identity03_square_identity():
    for grid, _, v, vector in _instances(seed=3):
        h = grid.h
        dv = delta(v, vector, h)
        left = (v * dv).values
        right = 0.5 * (delta(v * v, vector, h).values - h * (dv * dv).values)
        scale = float(np.max(v.values**2)) / h
        assert np.abs(left - right).max() <= 1e-12 * scale


def test_identity04_shift_composition():
    for grid, u, _, alpha in _instances(seed=4):
        beta = StencilVector((1, -1))
        h = grid.h
        left = shift(delta(u, beta, h), alpha).values
        right = delta(u, alpha + beta, h).values - delta(u, alpha, h).values
        scale = np.abs(u.values).max() / h
        assert np.abs(left - right).max() <= 1e-12 * scale


def test_operator01_matrix_matches_stencil_form():
    rng = np.random.default_rng(5)
    grid = TorusGrid(2, 16)
    spec = build_diagdom_stencil(
        [[1.0, 0.4], [0.4, 0.8]],
        [{"kind": "trig", "amplitude": 0.3, "wavevector": [1, 0]}, 0.2],
        {"kind": "trig", "amplitude": 0.5, "wavevector": [0, 1], "function": "cos"},
        kappa=0.1,
    )
    u = GridFunction(grid, rng.normal(size=grid.shape))
    direct = apply_Lh(spec, 0.0, u).flat
    matrix = assemble_Lh(spec, 0.0, grid) @ u.flat
    np.testing.assert_allclose(matrix, direct, rtol=1e-12, atol=1e-9)


def test_operator02_second_difference_of_sine():
    grid = TorusGrid(1, 64)
    spec = build_diagonal_stencil([1.0], [0.0], 0.0, [0.0])
    x = grid.points()[:, 0]
    u = GridFunction(grid, np.sin(2 * np.pi * x))
    expected = -(2 * np.sin(np.pi * grid.h) / grid.h) ** 2 * np.sin(2 * np.pi * x)
    np.testing.assert_allclose(apply_Lh(spec, 0.0, u).flat, expected, atol=1e-9)


def test_operator03_constants_are_in_the_kernel():
    grid = TorusGrid(2, 8)
    spec = build_diagdom_stencil([[1.0, -0.5], [-0.5, 1.0]], [0.3, -0.1], 0.0, kappa=0.2)
    u = GridFunction(grid, np.full(grid.shape, 3.0))
    assert sup_norm(apply_Lh(spec, 0.0, u)) <= 1e-12
    row_sums = np.asarray(assemble_Lh(spec, 0.0, grid).sum(axis=1)).ravel()
    assert np.abs(row_sums).max() <= 1e-9


def test_norm01_discrete_norms():
    grid = TorusGrid(1, 4)
    u = GridFunction(grid, [1.0, -2.0, 0.0, 1.0])
    assert sup_norm(u) == 2.0
    assert lp_norm(u, 1.0) == pytest.approx(4.0 * 0.25)
    assert lp_norm(u, 2.0) == pytest.approx(np.sqrt(6.0 * 0.25))
    assert lp_norm(u, np.inf) == 2.0
    assert w1_norm(u) > lp_norm(u)
    with pytest.raises(GridError):
        lp_norm(u, 0.5)


def test_norm02_vector_valued_magnitude():
    grid = TorusGrid(1, 2)
    u = GridFunction(grid, [[3.0, 4.0], [0.0, 0.0]])
    assert u.is_vector
    assert sup_norm(u) == 5.0


def test_restrict01_nested_grids():
    grid = TorusGrid(2, 8)
    x = grid.points()
    u = GridFunction(grid, np.sin(2 * np.pi * x[:, 0]) * np.cos(2 * np.pi * x[:, 1]))
    coarse = restrict(u, 4)
    assert coarse.grid == TorusGrid(2, 2)
    xc = coarse.grid.points()
    np.testing.assert_allclose(
        coarse.flat, np.sin(2 * np.pi * xc[:, 0]) * np.cos(2 * np.pi * xc[:, 1]), atol=1e-15
    )
    assert restrict(u, 1) is u
    with pytest.raises(GridError):
        restrict(u, 3)


def test_function01_finite_and_read_only():
    grid = TorusGrid(1, 4)
    with pytest.raises(GridError):
        GridFunction(grid, [0.0, np.nan, 0.0, 0.0])
    with pytest.raises(GridError):
        GridFunction(grid, np.zeros(5))
    u = GridFunction(grid, np.zeros(4))
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    with pytest.raises(GridError):
        u + GridFunction(TorusGrid(1, 8), np.zeros(8))
    frame = u.to_frame()
    assert list(frame.columns) == ["x_1", "value"]
