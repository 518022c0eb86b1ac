"""
The polynomial weight rho(x) = (1 + |eps x|^2)^(-s/2) and the
conjugated stencil L^ with L^(u rho) = rho L^h u.

With A_g(x) = a^g(x) [g in Lambda_0] + a^{-g}(x + h g) [-g in Lambda_0]
and M_g = A_g delta_{h,g} rho / T_{h,g} rho, the conjugated
coefficients are

    a^   = a
    p^g  = p^g - M_g
    c^g  = (c^g rho - p^g delta_{h,g} rho) / T_{h,g} rho      (g != 0)
    c^0  = c^0 - sum_{g != 0} M_g / h

On a torus rho is evaluated at the centered representative of x
in [-L/2, L/2)^d and treated as an arbitrary positive grid weight.
"""
from dataclasses import dataclass, replace
import logging

import numpy as np

import spde_richardson.settings as settings
from spde_richardson.exceptions import ConfigError, StencilError
from spde_richardson.fields import CallableField
from spde_richardson.grid import GridFunction
from spde_richardson.stencil import (
    PdeCoefficients,
    StencilSample,
    StencilSpec,
    StencilVector,
    as_vector,
    check_lower_bound_p,
    default_sample,
)
from spde_richardson.utils import as_points, logged_stage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightSpec:
    """Growth order s_bar >= 0 and scaling epsilon >= 0 (0 gives rho = 1)."""

    s_bar: float = 2.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.s_bar < 0:
            raise ConfigError("The growth order s_bar must be nonnegative.")
        if self.epsilon < 0:
            raise ConfigError("The weight scaling epsilon must be nonnegative.")

    def to_dict(self):
        return {"s_bar": float(self.s_bar), "epsilon": float(self.epsilon)}


def _centered(x, period):
    if period is None:
        return x
    return np.mod(x + 0.5 * period, period) - 0.5 * period


def _wrap(x, period):
    if period is None:
        return x
    return np.mod(x, period)


def rho(w, x, period=None):
    """
    rho(x) = 1 / (1 + |eps x|^2)^(s_bar / 2).

    A single point gives a float; a batch (N, d) gives an (N,) array.
    """
    single = np.ndim(x) <= 1
    points = _centered(as_points(x), period)
    out = (1.0 + w.epsilon**2 * np.sum(points**2, axis=1)) ** (-0.5 * w.s_bar)
    return float(out[0]) if single else out


def rho_gradient(w, x, period=None):
    """-s_bar eps^2 x (1 + |eps x|^2)^(-s_bar/2 - 1), shape (N, d)."""
    points = _centered(as_points(x), period)
    base = 1.0 + w.epsilon**2 * np.sum(points**2, axis=1)
    return -w.s_bar * w.epsilon**2 * points * (base ** (-0.5 * w.s_bar - 1))[:, None]


class WeightedCoefficients:
    """
    Providers p^ and c^ of the conjugated stencil.

    For h > 0 the finite-difference quotients of rho are used; at
    h = 0 they are replaced by the directional derivative of rho,
    except for c^0, which is evaluated at the construction mesh.
    """

    def __init__(self, base, weight, h, period=None):
        self.base = base
        self.weight = weight
        self.h = float(h)
        self.period = period
        self.others = [v for v in base.lambda1 if not v.is_zero]

    def rho(self, x):
        return rho(self.weight, x, self.period)

    def A(self, t, x, h, vector):
        out = np.zeros(x.shape[0])
        if vector in self.base.lambda0:
            out = out + self.base.a_coeff(t, x, h, vector)
        if -vector in self.base.lambda0:
            moved = _wrap(x + h * vector.array(), self.period)
            out = out + self.base.a_coeff(t, moved, h, -vector)
        return out

    def quotients(self, x, h, vector):
        """(delta_{h,g} rho, T_{h,g} rho) at x."""
        if h == 0:
            return rho_gradient(self.weight, x, self.period) @ vector.array(), self.rho(x)
        shifted = self.rho(x + h * vector.array())
        return (shifted - self.rho(x)) / h, shifted

    def M(self, t, x, h, vector):
        slope, shifted = self.quotients(x, h, vector)
        return self.A(t, x, h, vector) * slope / shifted

    def p(self, t, x, h, vector):
        vector = as_vector(vector)
        x = as_points(x, self.base.d)
        base = self.base.p_coeff(t, x, h, vector)
        if vector.is_zero:
            return base
        return base - self.M(t, x, h, vector)

    def c(self, t, x, h, vector):
        vector = as_vector(vector)
        x = as_points(x, self.base.d)
        if vector.is_zero:
            h = h if h > 0 else self.h
            out = self.base.c_coeff(t, x, h, vector)
            for other in self.others:
                out = out - self.M(t, x, h, other) / h
            return out
        slope, shifted = self.quotients(x, h, vector)
        return (
            self.base.c_coeff(t, x, h, vector) * self.rho(x)
            - self.base.p_coeff(t, x, h, vector) * slope
        ) / shifted


def transform_stencil(spec, w, h, period=None):
    """
    The stencil of L^ with L^(u rho) = rho L^h u.

    Parameters
    ----------
    spec: StencilSpec
        Must satisfy Lambda_0 U -Lambda_0 in Lambda_1.
    w: WeightSpec
    h: float
        The construction mesh, used for c^0 at h = 0. Must be
        positive unless epsilon = 0.
    period: None or float
        The torus period; rho is then sampled at centered
        coordinates and shifted points wrap around.

    Returns
    -------
    StencilSpec tagged with the weight parameters.
    """
    missing = [
        str(v)
        for lam in spec.lambda0
        for v in (lam, -lam)
        if v not in spec.lambda1
    ]
    if missing:
        raise StencilError(
            f"The weight transform needs Lambda_0 U -Lambda_0 in Lambda_1; missing {', '.join(missing)}."
        )
    if not h > 0 and w.epsilon > 0:
        raise StencilError("The weight transform needs a positive construction mesh h.")

    coefficients = WeightedCoefficients(spec, w, h, period)
    zero = StencilVector.zero(spec.d)
    lambda1 = spec.lambda1 if zero in spec.lambda1 else (zero,) + spec.lambda1
    tags = dict(spec.tags)
    tags.update(w.to_dict(), h=float(h), period=period)
    recipe = None
    if spec.recipe is not None:
        recipe = {
            "constructor": "weighted",
            "base": dict(spec.recipe),
            **w.to_dict(),
            "h": float(h),
            "period": period,
        }
    logger.debug("Weighted stencil with s_bar=%g, epsilon=%g, h=%g", w.s_bar, w.epsilon, h)
    return StencilSpec(
        d=spec.d,
        lambda0=spec.lambda0,
        lambda1=lambda1,
        a_coeff=spec.a_coeff,
        p_coeff=coefficients.p,
        c_coeff=coefficients.c,
        nu=spec.nu,
        R=spec.R,
        time_independent=spec.time_independent,
        recipe=recipe,
        tags=tags,
    )


def weight_on_grid(w, grid):
    """rho sampled on the grid points (centered on the torus)."""
    return GridFunction(grid, rho(w, grid.points(), grid.period))


class WeightedField(CallableField):
    """rho(x) * field(t, x) for scalar or vector fields."""

    def __init__(self, field, weight, period=None):
        self.field = field
        self.weight = weight
        self.period = period
        super().__init__(self._evaluate, getattr(field, "time_dependent", True))

    def _evaluate(self, t, x):
        value = np.asarray(self.field(t, x), dtype=float)
        weight = rho(self.weight, x, self.period)
        return value * weight.reshape(weight.shape + (1,) * (value.ndim - 1))


@dataclass
class EpsilonCertificate:
    """
    The epsilon found by choose_epsilon and the sample it was
    certified on.
    """

    epsilon: float
    kappa: float
    h_max: float
    tries: int
    meshes: np.ndarray
    times: np.ndarray
    points: np.ndarray
    min_p: float

    def __str__(self):
        vals = [
            f"epsilon = {self.epsilon:.6g}",
            f"kappa = {self.kappa:.6g}",
            f"h_max = {self.h_max:.6g}",
            f"tries = {self.tries}",
            f"min p = {self.min_p:.6g}",
            f"points = {self.points.shape[0]}",
        ]
        return "<EpsilonCertificate: " + ", ".join(vals) + ">"


def _min_p(spec, sample):
    return min(
        float(spec.p_coeff(t, sample.points, h, vec).min(initial=np.inf))
        for t, h in sample
        for vec in spec.lambda1
        if not vec.is_zero
    )


@logged_stage("epsilon search")
def choose_epsilon(spec, w, kappa, h_max, sample=None, period=None, T=1.0):
    """
    The largest epsilon = EPSILON_SEARCH_START * 2^-k such that the
    conjugated first-order weights stay nonnegative for all sampled
    meshes in [0, h_max].

    Parameters
    ----------
    spec: StencilSpec
        Its first-order weights must be bounded below by kappa.
    w: WeightSpec
        Provides s_bar; its epsilon is ignored.
    kappa: float
        The margin absorbing the perturbation; kappa <= 0 is refused.
    h_max: float
    sample: None or StencilSample
        Defaults to a seeded sample in [0, period)^d.
    period: None or float
    T: float
        Horizon of the sampled times.

    Returns
    -------
    EpsilonCertificate
    """
    if not kappa > 0:
        raise StencilError("kappa must be positive: no margin to absorb the weight perturbation.")
    if not h_max > 0:
        raise StencilError("h_max must be positive.")
    if sample is None:
        sample = default_sample(spec.d, period=period, h_max=h_max, T=T)
    sample = StencilSample(
        times=sample.times,
        points=sample.points,
        meshes=np.linspace(0.0, h_max, settings.EPSILON_SEARCH_MESHES),
    )
    if not check_lower_bound_p(spec, kappa, sample):
        raise StencilError(f"The stencil does not satisfy p^g >= kappa = {kappa} on the sample.")

    for k in range(settings.EPSILON_SEARCH_STEPS + 1):
        epsilon = settings.EPSILON_SEARCH_START * 2.0**-k
        weighted = transform_stencil(spec, WeightSpec(w.s_bar, epsilon), h_max, period)
        low = _min_p(weighted, sample)
        logger.debug("epsilon=%.3g gives min p = %.3g", epsilon, low)
        if low >= 0.0:
            logger.info("Chose epsilon=%.6g after %d tries", epsilon, k + 1)
            return EpsilonCertificate(
                epsilon=epsilon,
                kappa=float(kappa),
                h_max=float(h_max),
                tries=k + 1,
                meshes=sample.meshes,
                times=sample.times,
                points=sample.points,
                min_p=low,
            )
    raise StencilError(
        f"No admissible epsilon down to {epsilon:.3g}; kappa={kappa} is too small."
    )


def weighted_problem(problem, w, h):
    """
    The conjugated problem on the torus of `problem`: stencil L^,
    data (psi rho, f rho, g rho), nu unchanged, no oracle.
    """
    period = problem.period
    c = problem.coefficients
    coefficients = PdeCoefficients(
        d=c.d,
        a=c.a,
        b=c.b,
        c=c.c,
        f=WeightedField(c.f, w, period) if c.f is not None else None,
        g=WeightedField(c.g, w, period) if c.g is not None else None,
        nu=c.nu,
        psi=WeightedField(c.psi, w, period),
        R=c.R,
    )
    return replace(
        problem,
        name=f"{problem.name}:weighted",
        coefficients=coefficients,
        stencil=transform_stencil(problem.stencil, w, h, period),
        oracle=None,
    )


def unweight(trajectory, w):
    """Divide every snapshot of a weighted trajectory by rho."""
    weight = weight_on_grid(w, trajectory.grid)
    return trajectory.map(lambda state: state / weight)
