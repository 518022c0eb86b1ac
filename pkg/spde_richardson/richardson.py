"""
Richardson extrapolation in the mesh width.

Solutions u^{h/n_i}, i = 0..k, on nested grids are combined as

    v^h = sum_i c_i u^{h/n_i}

on the coarsest grid, with weights solving c V = e_1 for the
Vandermonde matrix V_ij = n_i^{-j}. The weights are computed in
exact rational arithmetic and converted to floats once.
"""
from dataclasses import dataclass
import logging

import numpy as np
import sympy

from spde_richardson.exceptions import ExtrapolationError
from spde_richardson.grid import GridFunction, restrict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtrapolationPlan:
    """
    Weights combining k+1 solutions on meshes h / n_i.

    The attributes of ExtrapolationPlan are:

    plan.k (int):
        The number of expansion terms removed.
    plan.ratios (tuple of int):
        The mesh divisors 1 = n_0 < n_1 < ... < n_k.
    plan.weights (tuple of float):
        The weights c_i as floats.
    plan.exact (tuple of sympy.Rational):
        The same weights as exact fractions.
    """

    k: int
    ratios: tuple
    weights: tuple
    exact: tuple

    def fractions(self):
        """The weights as printable fractions, e.g. ['-1', '2']."""
        return [str(c) for c in self.exact]

    def residuals(self):
        """
        (sum_i c_i - 1, sum_i c_i n_i^-1, ..., sum_i c_i n_i^-k)
        evaluated in floating point.
        """
        c = np.asarray(self.weights)
        n = np.asarray(self.ratios, dtype=float)
        out = [float(c.sum() - 1.0)]
        out += [float(np.sum(c * n ** (-j))) for j in range(1, self.k + 1)]
        return out

    def __str__(self):
        vals = [
            f"k = {self.k}",
            f"ratios = ({', '.join(str(n) for n in self.ratios)})",
            f"weights = ({', '.join(self.fractions())})",
        ]
        return "<ExtrapolationPlan: " + ", ".join(vals) + ">"


def _check_ratios(ratios):
    ratios = [int(n) for n in ratios]
    if not ratios or ratios[0] != 1:
        raise ExtrapolationError(f"Mesh ratios must start at 1, got {ratios}.")
    if len(set(ratios)) != len(ratios):
        raise ExtrapolationError(
            f"Repeated mesh ratios {ratios} make the Vandermonde matrix singular."
        )
    if any(b <= a for a, b in zip(ratios, ratios[1:])):
        raise ExtrapolationError(f"Mesh ratios must be strictly increasing, got {ratios}.")
    return tuple(ratios)


def coefficient_weights(ratios, j):
    """
    Exact weights c with sum_i c_i n_i^-m = [m == j] for m = 0..k.

    Applied to solutions with the expansion u^{h/n} = sum_m h^m n^-m U_m,
    sum_i c_i u^{h/n_i} = h^j U_j up to O(h^{k+1}). j = 0 gives the
    extrapolation weights.

    Parameters
    ----------
    ratios: sequence of int
        The mesh divisors n_0 = 1 < n_1 < ... < n_k.
    j: int
        The isolated power, 0 <= j <= k.

    Returns
    -------
    list of sympy.Rational
    """
    ratios = _check_ratios(ratios)
    k = len(ratios) - 1
    if not 0 <= j <= k:
        raise ExtrapolationError(f"Cannot isolate h^{j} with {k + 1} meshes.")
    # Row i of V holds n_i^0, n_i^-1, ..., n_i^-k; c V = e_j means V^T c = e_j.
    V = sympy.Matrix(
        k + 1, k + 1, lambda i, m: sympy.Rational(1, ratios[i]) ** m
    )
    rhs = sympy.Matrix([1 if m == j else 0 for m in range(k + 1)])
    try:
        c = V.T.LUsolve(rhs)
    except (ValueError, ZeroDivisionError) as e:
        raise ExtrapolationError(f"Singular Vandermonde system for ratios {ratios}.") from e
    return [sympy.Rational(ci) for ci in c]


def vandermonde_weights(k, ratios=None):
    """
    The extrapolation plan of order k.

    Parameters
    ----------
    k: int
        Number of expansion terms removed (k + 1 meshes).
    ratios: None or sequence of int
        Mesh divisors, 2^i by default.

    Returns
    -------
    ExtrapolationPlan
    """
    if k < 0:
        raise ExtrapolationError("The extrapolation order k must be nonnegative.")
    ratios = tuple(2**i for i in range(k + 1)) if ratios is None else tuple(ratios)
    if len(ratios) != k + 1:
        raise ExtrapolationError(f"k={k} needs {k + 1} mesh ratios, got {len(ratios)}.")
    exact = tuple(coefficient_weights(ratios, 0))
    plan = ExtrapolationPlan(
        k=k,
        ratios=_check_ratios(ratios),
        weights=tuple(float(c) for c in exact),
        exact=exact,
    )
    logger.debug("Extrapolation weights %s", plan)
    return plan


def _restricted(solutions, ratios):
    coarse = solutions[0].grid
    out = []
    for u, n in zip(solutions, ratios):
        grid = u.grid
        if grid.d != coarse.d or grid.period != coarse.period or grid.n != coarse.n * n:
            raise ExtrapolationError(
                f"Expected a grid with n={coarse.n * n} (ratio {n}), got {grid}."
            )
        out.append(restrict(u, n))
    return out


def extrapolate(plan, solutions):
    """
    v^h = sum_i c_i restrict(u^{h/n_i}) on the coarsest grid.

    Parameters
    ----------
    plan: ExtrapolationPlan
    solutions: list of GridFunction
        solutions[i] lives on the grid with n_0 * ratios[i] points
        per axis, all at the same snapshot time.

    Returns
    -------
    GridFunction on the grid of solutions[0]
    """
    if len(solutions) != plan.k + 1:
        raise ExtrapolationError(
            f"The plan combines {plan.k + 1} solutions, got {len(solutions)}."
        )
    if plan.k == 0:
        return solutions[0]
    restricted = _restricted(solutions, plan.ratios)
    values = sum(c * u.values for c, u in zip(plan.weights, restricted))
    return GridFunction(restricted[0].grid, values)


def extrapolate_trajectories(plan, trajectories):
    """
    Snapshot-wise extrapolation of trajectories recorded at the same
    times; returns (times, list of GridFunction).
    """
    times = trajectories[0].times
    for trajectory in trajectories[1:]:
        if not np.allclose(trajectory.times, times, rtol=1e-12, atol=0.0):
            raise ExtrapolationError("Trajectories were recorded at different times.")
    states = [
        extrapolate(plan, [trajectory.states[s] for trajectory in trajectories])
        for s in range(len(times))
    ]
    return times, states


def estimate_expansion_term(solutions, j, ratios=None, factorial=False):
    """
    Empirical coefficient of h^j in the expansion of u^h.

    With u^h = sum_m h^m U_m + O(h^{m_max + 1}), the combination
    sum_i c_i restrict(u^{h/n_i}) / h^j of coefficient_weights
    recovers U_j = u^{(j)} / j! up to O(h^{k+1-j}).

    Parameters
    ----------
    solutions: list of GridFunction
        Coupled solutions at h, h/n_1, h/n_2, ... (at least j+1).
    j: int
        1 or 2 (any 1 <= j < len(solutions)).
    ratios: None or sequence of int
        Mesh divisors, 2^i by default.
    factorial: bool
        Return j! U_j = u^{(j)} instead of the raw coefficient.

    Returns
    -------
    GridFunction on the grid of solutions[0]
    """
    ratios = tuple(2**i for i in range(len(solutions))) if ratios is None else tuple(ratios)
    if len(ratios) != len(solutions):
        raise ExtrapolationError("Give one mesh ratio per solution.")
    weights = [float(c) for c in coefficient_weights(ratios, j)]
    restricted = _restricted(solutions, ratios)
    h = restricted[0].grid.h
    scale = float(sympy.factorial(j)) if factorial else 1.0
    values = sum(c * u.values for c, u in zip(weights, restricted)) * (scale / h**j)
    return GridFunction(restricted[0].grid, values)
