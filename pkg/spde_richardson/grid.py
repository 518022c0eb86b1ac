"""
Periodic lattices, grid functions, shift and difference operators,
the discrete operator L^h and the discrete norms.

Grid points are x = h * (k_1, ..., k_d), 0 <= k_i < n, stored in
row-major order. Every operator wraps around the torus.
"""
from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd
import scipy.sparse as sp

from spde_richardson.exceptions import GridError
from spde_richardson.stencil import StencilVector, as_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TorusGrid:
    """
    The lattice (hZ / LZ)^d with n points per axis and mesh h = L / n.
    """

    d: int
    n: int
    period: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise GridError("The dimension d must be at least 1.")
        if self.n < 1:
            raise GridError("The number of points per axis must be positive.")
        if not self.period > 0:
            raise GridError("The period must be positive.")
        object.__setattr__(self, "period", float(self.period))

    @property
    def h(self):
        return self.period / self.n

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def size(self):
        return self.n**self.d

    def points(self):
        """(n^d, d) array of grid points in row-major order."""
        axes = [np.arange(self.n) * self.h] * self.d
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def check_reach(self, reach):
        if self.n < 2 * reach + 1:
            raise GridError(
                f"Stencil reach {reach} wraps around a torus with n={self.n} "
                f"(need n >= {2 * reach + 1})."
            )

    def refine(self, ratio):
        return TorusGrid(self.d, self.n * int(ratio), self.period)

    def __str__(self):
        return f"<TorusGrid: d = {self.d}, n = {self.n}, h = {self.h:.6g}, L = {self.period:.6g}>"


class GridFunction:
    """
    Real or R-vector values on the points of a TorusGrid.

    values has shape grid.shape (scalar) or grid.shape + (R,)
    (vector valued). Values are copied and made read-only on
    construction and must be finite.
    """

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if grid.d > 1 and values.ndim in (1, 2) and values.shape[0] == grid.size:
            values = values.reshape(grid.shape + values.shape[1:])
        if values.shape[: grid.d] != grid.shape or values.ndim > grid.d + 1:
            raise GridError(
                f"Values of shape {values.shape} do not fit a grid of shape {grid.shape}."
            )
        if not np.all(np.isfinite(values)):
            raise GridError("Grid function values must be finite.")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_field(cls, grid, field, t=0.0):
        """Sample a field (t, x) -> (N,) or (N, R) at the grid points."""
        values = np.asarray(field(t, grid.points()), dtype=float)
        return cls(grid, values.reshape(grid.shape + values.shape[1:]))

    @classmethod
    def zeros(cls, grid, R=None):
        return cls(grid, np.zeros(grid.shape + (() if R is None else (R,))))

    @property
    def is_vector(self):
        return self.values.ndim == self.grid.d + 1

    @property
    def flat(self):
        """Row-major values: (n^d,) or (n^d, R)."""
        return self.values.reshape((self.grid.size,) + self.values.shape[self.grid.d :])

    def _check_grid(self, other):
        if other.grid != self.grid:
            raise GridError(f"Grid mismatch: {self.grid} vs {other.grid}.")

    def _combine(self, other, op):
        if isinstance(other, GridFunction):
            self._check_grid(other)
            other = other.values
        return GridFunction(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, np.divide)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def to_frame(self):
        """One row per grid point: x_1..x_d, then value or value_1..value_R."""
        points = self.grid.points()
        data = {f"x_{i + 1}": points[:, i] for i in range(self.grid.d)}
        flat = self.flat
        if self.is_vector:
            for r in range(flat.shape[1]):
                data[f"value_{r + 1}"] = flat[:, r]
        else:
            data["value"] = flat
        return pd.DataFrame(data)

    def __str__(self):
        return f"<GridFunction: grid = {self.grid}, vector = {self.is_vector}>"


def _roll(values, vector, d):
    # result(k) = values(k + vector)
    return np.roll(values, shift=tuple(-c for c in vector.coords), axis=tuple(range(d)))


def shift(u, vector):
    """T_{h,l} u(x) = u(x + h l) with periodic wrap."""
    vector = as_vector(vector)
    u.grid.check_reach(vector.reach)
    return GridFunction(u.grid, _roll(u.values, vector, u.grid.d))


def delta(u, vector, h_signed):
    """
    delta_{h,l} u(x) = (u(x + h l) - u(x)) / h for h = +-grid.h;
    the negative sign gives delta_{-h,l}.
    """
    if h_signed == 0:
        raise GridError("delta needs a nonzero signed mesh width.")
    if not np.isclose(abs(h_signed), u.grid.h, rtol=1e-12, atol=0.0):
        raise GridError(f"|h| = {abs(h_signed)} does not match the grid mesh {u.grid.h}.")
    vector = as_vector(vector)
    sign = 1 if h_signed > 0 else -1
    shifted = shift(u, vector if sign > 0 else -vector)
    return GridFunction(u.grid, (shifted.values - u.values) / h_signed)


class GridCoefficients:
    """
    The stencil coefficients of L^h evaluated on the grid points at
    (t, h = grid.h), as arrays of shape grid.shape keyed by vector.
    """

    def __init__(self, spec, t, grid):
        if spec.d != grid.d:
            raise GridError(f"Stencil dimension {spec.d} does not match grid dimension {grid.d}.")
        grid.check_reach(spec.reach)
        points = grid.points()
        h = grid.h
        self.grid = grid
        self.t = t
        self.a = {v: spec.a_coeff(t, points, h, v).reshape(grid.shape) for v in spec.lambda0}
        self.p = {
            v: spec.p_coeff(t, points, h, v).reshape(grid.shape)
            for v in spec.lambda1
            if not v.is_zero
        }
        self.c = {v: spec.c_coeff(t, points, h, v).reshape(grid.shape) for v in spec.lambda1}


def apply_Lh(spec, t, u, coefficients=None):
    """
    L^h u evaluated term by term with shift and delta:

        sum_l delta_{-h,l}(a^l delta_{h,l} u) + sum_g p^g delta_{h,g} u
        + sum_g c^g T_{h,g} u
    """
    if u.is_vector:
        raise GridError("L^h acts on scalar grid functions.")
    grid = u.grid
    coefficients = coefficients or GridCoefficients(spec, t, grid)
    h = grid.h
    out = np.zeros(grid.shape)
    for vec, a in coefficients.a.items():
        flux = GridFunction(grid, a * delta(u, vec, h).values)
        out += delta(flux, vec, -h).values
    for vec, p in coefficients.p.items():
        out += p * delta(u, vec, h).values
    for vec, c in coefficients.c.items():
        out += c * shift(u, vec).values
    return GridFunction(grid, out)


def assemble_Lh(spec, t, grid, coefficients=None):
    """
    L^h as a sparse (n^d, n^d) CSR matrix acting on row-major values.

    Row x of the second-order term of l reads
        [a(x) u(x+l) - (a(x) + a(x-l)) u(x) + a(x-l) u(x-l)] / h^2.
    """
    coefficients = coefficients or GridCoefficients(spec, t, grid)
    h = grid.h
    d = grid.d
    index = np.arange(grid.size).reshape(grid.shape)
    rows, cols, vals = [], [], []

    def add(target, value):
        rows.append(index.ravel())
        cols.append(target.ravel())
        vals.append(np.broadcast_to(value, grid.shape).ravel())

    for vec, a in coefficients.a.items():
        forward = _roll(index, vec, d)
        backward = _roll(index, -vec, d)
        a_back = _roll(a, -vec, d)
        add(forward, a / h**2)
        add(index, -(a + a_back) / h**2)
        add(backward, a_back / h**2)
    for vec, p in coefficients.p.items():
        add(_roll(index, vec, d), p / h)
        add(index, -p / h)
    for vec, c in coefficients.c.items():
        add(_roll(index, vec, d), c)

    if not rows:
        return sp.csr_matrix((grid.size, grid.size))
    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    return matrix.tocsr()


def _magnitude(u):
    if u.is_vector:
        return np.linalg.norm(u.values, axis=-1)
    return np.abs(u.values)


def lp_norm(u, p=2.0):
    """
    (sum_x |u(x)|^p h^d)^(1/p); |u(x)| is the Euclidean magnitude
    for vector-valued u. p = inf gives the sup norm.
    """
    if p < 1:
        raise GridError(f"lp_norm needs p >= 1, got {p}.")
    if np.isinf(p):
        return sup_norm(u)
    magnitude = _magnitude(u)
    return float((np.sum(magnitude**p) * u.grid.h**u.grid.d) ** (1.0 / p))


def sup_norm(u):
    return float(_magnitude(u).max(initial=0.0))


def w1_norm(u, p=2.0):
    """lp_norm(u) + sum_i lp_norm(delta_{h,e_i} u)"""
    total = lp_norm(u, p)
    for i in range(u.grid.d):
        total += lp_norm(delta(u, StencilVector.unit(i, u.grid.d), u.grid.h), p)
    return total


def restrict(u_fine, ratio):
    """Sample u_fine at every ratio-th point per axis."""
    ratio = int(ratio)
    if ratio < 1:
        raise GridError("The restriction ratio must be a positive integer.")
    grid = u_fine.grid
    if grid.n % ratio:
        raise GridError(f"n={grid.n} is not divisible by the restriction ratio {ratio}.")
    if ratio == 1:
        return u_fine
    index = (slice(None, None, ratio),) * grid.d
    return GridFunction(TorusGrid(grid.d, grid.n // ratio, grid.period), u_fine.values[index])

