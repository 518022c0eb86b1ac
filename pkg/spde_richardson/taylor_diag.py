"""
Diagnostics of the Taylor expansions of the difference operators:

    delta_{h,l} phi          = sum_i h^i A_i d_l^{i+1} phi
    delta_{-h,l} delta_{h,l} phi = sum_i h^i B_i d_l^{i+2} phi
    T_{h,l} phi              = sum_i h^i S_i d_l^i phi

with A_i = 1/(i+1)!, B_i = 0 for odd i and 2/(i+2)! for even i,
S_i = 1/i!. The derivatives of the test functions are analytic, so
the check does not reuse the operators it measures.
"""
from dataclasses import dataclass
import logging

import mpmath
import numpy as np
import pandas as pd
import sympy

import spde_richardson.settings as settings
from spde_richardson.exceptions import ConfigError, FloorError
from spde_richardson.grid import GridFunction, TorusGrid, delta, shift
from spde_richardson.stencil import as_vector

logger = logging.getLogger(__name__)

OPERATORS = ("delta", "second_delta", "shift")
# Derivative order of the leading term of each operator.
LEADING_ORDER = {"delta": 1, "second_delta": 2, "shift": 0}


@dataclass(frozen=True)
class ExpansionCoeffs:
    """The sequences A, B, S up to index n as exact rationals."""

    n: int
    A: tuple
    B: tuple
    S: tuple

    def for_operator(self, operator):
        return {"delta": self.A, "second_delta": self.B, "shift": self.S}[operator]


def expansion_coeffs(n):
    if n < 0:
        raise ConfigError("The expansion index n must be nonnegative.")
    A = tuple(sympy.Rational(1, sympy.factorial(i + 1)) for i in range(n + 1))
    B = tuple(
        sympy.Integer(0) if i % 2 else sympy.Rational(2, sympy.factorial(i + 2))
        for i in range(n + 1)
    )
    S = tuple(sympy.Rational(1, sympy.factorial(i)) for i in range(n + 1))
    return ExpansionCoeffs(n=n, A=A, B=B, S=S)


class SmoothFunction:
    """
    A test function with analytic directional derivatives.

    Subclasses implement value(x), derivative(i, vector, x) on
    (N, d) arrays and mp_value(point) on a list of mpf.
    """

    periodic = False
    period = None

    def value(self, x):
        raise NotImplementedError

    def derivative(self, i, vector, x):
        raise NotImplementedError

    def mp_value(self, point):
        raise NotImplementedError


class TrigFunction(SmoothFunction):
    """amplitude * sin(2 pi k.x / period + phase), exactly periodic."""

    periodic = True

    def __init__(self, wavevector=(1,), amplitude=1.0, phase=0.0, period=2 * np.pi):
        self.wavevector = np.asarray(wavevector, dtype=int)
        self.amplitude = float(amplitude)
        self.phase = float(phase)
        self.period = float(period)

    @property
    def d(self):
        return self.wavevector.size

    def _omega(self):
        return 2 * np.pi / self.period

    def value(self, x):
        return self.derivative(0, np.zeros(self.d, dtype=int), x)

    def derivative(self, i, vector, x):
        coords = np.asarray(getattr(vector, "coords", vector), dtype=float)
        rate = self._omega() * float(self.wavevector @ coords)
        arg = self._omega() * (np.asarray(x) @ self.wavevector) + self.phase
        return self.amplitude * rate**i * np.sin(arg + i * np.pi / 2)

    def mp_value(self, point):
        omega = 2 * mpmath.pi / mpmath.mpf(self.period)
        arg = omega * mpmath.fsum(int(k) * p for k, p in zip(self.wavevector, point))
        return mpmath.mpf(self.amplitude) * mpmath.sin(arg + mpmath.mpf(self.phase))


class ConstantFunction(SmoothFunction):
    periodic = True

    def __init__(self, value=1.0, d=1, period=2 * np.pi):
        self.constant = float(value)
        self.d = d
        self.period = float(period)

    def value(self, x):
        return np.full(np.asarray(x).shape[0], self.constant)

    def derivative(self, i, vector, x):
        if i == 0:
            return self.value(x)
        return np.zeros(np.asarray(x).shape[0])

    def mp_value(self, point):
        return mpmath.mpf(self.constant)


class PolynomialFunction(SmoothFunction):
    """
    sum_m coeffs[m] (direction . x)^m. Not periodic: checks evaluate
    the operators pointwise instead of on a torus.
    """

    def __init__(self, coeffs, direction=(1,)):
        self.coeffs = [float(c) for c in coeffs]
        self.direction = np.asarray(direction, dtype=float)

    @property
    def d(self):
        return self.direction.size

    def derivative(self, i, vector, x):
        coords = np.asarray(getattr(vector, "coords", vector), dtype=float)
        s = np.asarray(x) @ self.direction
        rate = float(self.direction @ coords) ** i
        out = np.zeros_like(s)
        for m, c in enumerate(self.coeffs):
            if m >= i:
                out += c * float(sympy.ff(m, i)) * s ** (m - i)
        return rate * out

    def value(self, x):
        return self.derivative(0, np.zeros(self.d), x)

    def mp_value(self, point):
        s = mpmath.fsum(mpmath.mpf(c) * p for c, p in zip(self.direction, point))
        return mpmath.polyval([mpmath.mpf(c) for c in reversed(self.coeffs)], s)


def _apply_on_grid(operator, phi, vector, n, period):
    grid = TorusGrid(phi.d, n, period)
    points = grid.points()
    u = GridFunction(grid, phi.value(points))
    h = grid.h
    if operator == "delta":
        out = delta(u, vector, h)
    elif operator == "second_delta":
        out = delta(delta(u, vector, h), vector, -h)
    else:
        out = shift(u, vector)
    return points, h, out.flat


def _apply_pointwise(operator, phi, vector, h, points):
    step = h * np.asarray(vector.coords, dtype=float)
    here = phi.value(points)
    if operator == "delta":
        return (phi.value(points + step) - here) / h
    if operator == "second_delta":
        return (phi.value(points + step) - 2 * here + phi.value(points - step)) / h**2
    return phi.value(points + step)


def _expected(operator, phi, vector, n, h, points):
    coeffs = expansion_coeffs(n).for_operator(operator)
    offset = LEADING_ORDER[operator]
    out = np.zeros(points.shape[0])
    for i, c in enumerate(coeffs):
        if c != 0:
            out += h**i * float(c) * phi.derivative(i + offset, vector, points)
    return out


@dataclass
class ExpansionCheck:
    """
    Residuals sup_x |op_h phi - sum_{i <= n} h^i coeff_i d^{i+o} phi|
    over a sequence of meshes, with the fitted log-log slope
    (None when every residual is exactly zero).
    """

    operator: str
    n: int
    vector: object
    meshes: list
    residuals: list
    slope: float = None

    @property
    def expected_slope(self):
        return self.n + 1

    @property
    def passed(self):
        return self.slope is None or self.slope >= self.expected_slope - 0.2


def verify_expansion(operator, phi, vector, n, ns=(16, 32, 64, 128), period=None, points=None):
    """
    Measure the remainder of the n-term expansion of an operator.

    Parameters
    ----------
    operator: str
        "delta", "second_delta" or "shift".
    phi: SmoothFunction
    vector: integer vector l
    n: int
        Number of expansion terms kept minus one.
    ns: sequence of int
        Periodic functions are sampled on tori with these numbers
        of points per axis (h = period / n).
    period: None or float
        Defaults to phi.period, or 2 pi for non-periodic functions.
    points: None or (N, d) array
        Sample points for non-periodic functions; a seeded random
        sample in [0, 1)^d by default.

    Returns
    -------
    ExpansionCheck
    """
    # Imported here: the harness depends on most modules of the package.
    from spde_richardson.harness import fit_order

    if operator not in OPERATORS:
        raise ConfigError(f"Unknown operator '{operator}'. Use one of {OPERATORS}.")
    vector = as_vector(vector)
    period = period or phi.period or 2 * np.pi
    meshes, residuals = [], []
    for m in ns:
        if phi.periodic:
            x, h, values = _apply_on_grid(operator, phi, vector, m, period)
        else:
            h = period / m
            if points is None:
                rng = np.random.default_rng(settings.SAMPLE_SEED)
                points = rng.uniform(0.0, 1.0, size=(settings.SAMPLE_SIZE, phi.d))
            x, values = points, _apply_pointwise(operator, phi, vector, h, points)
        residual = float(np.abs(values - _expected(operator, phi, vector, n, h, x)).max())
        meshes.append(h)
        residuals.append(residual)

    check = ExpansionCheck(operator, n, vector, meshes, residuals)
    try:
        check.slope = fit_order(list(zip(meshes, residuals))).slope
    except FloorError:
        logger.debug("%s with n=%d: all residuals are zero", operator, n)
    return check


def mp_apply(operator, phi, point, vector, h):
    """op_h phi at one point, in mpmath arithmetic."""
    point = [mpmath.mpf(p) for p in point]
    step = [h * int(c) for c in vector.coords]
    forward = phi.mp_value([p + s for p, s in zip(point, step)])
    here = phi.mp_value(point)
    if operator == "delta":
        return (forward - here) / h
    if operator == "second_delta":
        backward = phi.mp_value([p - s for p, s in zip(point, step)])
        return (forward - 2 * here + backward) / h**2
    return forward


def fit_expansion_coefficients(operator, phi, vector, point, degree=4, h0=1e-2, dps=50):
    """
    Fit op_h phi(x) = c_0 + c_1 h + ... + c_degree h^degree at one
    point by interpolating at h0 / 2^m, m = 0..degree, in mpmath
    with dps decimal digits.

    For the symmetric second difference c_1 vanishes and
    c_2 = d^4 phi / 12.

    Returns
    -------
    list of float
    """
    vector = as_vector(vector)
    with mpmath.workdps(dps):
        hs = [mpmath.mpf(h0) / 2**m for m in range(degree + 1)]
        values = [mp_apply(operator, phi, point, vector, h) for h in hs]
        V = mpmath.matrix([[h**j for j in range(degree + 1)] for h in hs])
        coeffs = mpmath.lu_solve(V, mpmath.matrix(values))
        return [float(c) for c in coeffs]


def expansion_report(checks):
    """One row per (check, mesh): op, n, h, residual, slope."""
    rows = []
    for check in checks:
        for h, residual in zip(check.meshes, check.residuals):
            rows.append(
                {
                    "op": check.operator,
                    "n": check.n,
                    "vector": str(check.vector),
                    "h": h,
                    "residual": residual,
                    "slope": check.slope,
                }
            )
    return pd.DataFrame(rows, columns=["op", "n", "vector", "h", "residual", "slope"])


def write_expansion_report(checks, path):
    expansion_report(checks).to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
    logger.info("Wrote expansion report to %s", path)
