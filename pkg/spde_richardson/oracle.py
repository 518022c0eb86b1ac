"""
Reference solutions for constant-coefficient problems with
trigonometric data, computed mode by mode and independent of the
grid operators, plus time-refined references on a fixed grid.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from spde_richardson.exceptions import OracleError
from spde_richardson.fields import TrigPolynomial, parse_field
from spde_richardson.integrator import SchemeConfig, integrate
from spde_richardson.noise import coarsen_path
from spde_richardson.utils import as_points

logger = logging.getLogger(__name__)

KINDS = ("heat", "advection_diffusion", "geometric", "fine_reference")


def _trig(psi):
    psi = parse_field(psi)
    if not isinstance(psi, TrigPolynomial):
        raise OracleError("Exact oracles need psi given as a trigonometric polynomial.")
    return psi


def _matrix(a, d):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(d)
    if a.shape != (d, d):
        raise OracleError(f"The diffusion matrix must be {d}x{d}, got shape {a.shape}.")
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
        raise OracleError("The diffusion matrix must be symmetric.")
    if np.linalg.eigvalsh(a).min() < -1e-12:
        raise OracleError("The diffusion matrix must be positive semidefinite.")
    return a


def advection_diffusion_solution(a, b, c, psi, t, x):
    """
    Exact solution of u_t = a^{ij} u_ij + b^i u_i + c u on the torus
    with u(0) = psi a trigonometric polynomial:

        e^{ct} [psi_0 + sum_k psi_k exp(-(2 pi / L)^2 k.a k t) e_k(x + b t)]

    Parameters
    ----------
    a: (d, d) array or float
        Constant positive semidefinite diffusion matrix.
    b: (d,) array or float
        Constant drift.
    c: float
        Constant zero-order coefficient.
    psi: TrigPolynomial
    t: float
    x: array_like
        Points of shape (N, d) (or one point of shape (d,)).

    Returns
    -------
    np.ndarray of shape (N,)
    """
    psi = _trig(psi)
    d = psi.d or np.asarray(x).shape[-1]
    x = as_points(x, d)
    a = _matrix(a, d)
    b = np.broadcast_to(np.asarray(b, dtype=float), (d,))
    scale = 2 * np.pi / psi.period
    moved = x + b * t
    out = np.full(x.shape[0], psi.constant)
    for amplitude, wavevector, function in psi.modes:
        k = np.asarray(wavevector, dtype=float)
        decay = np.exp(-(scale**2) * (k @ a @ k) * t)
        fn = np.sin if function == "sin" else np.cos
        out = out + amplitude * decay * fn(scale * (moved @ k))
    return np.exp(c * t) * out


def heat_solution(a, psi, t, x):
    """Exact solution of u_t = a^{ij} u_ij on the torus."""
    return advection_diffusion_solution(a, 0.0, 0.0, psi, t, x)


def geometric_solution(a, nu, path, psi, t, x):
    """
    Exact solution of du = a^{ij} u_ij dt + nu u dw with one Wiener
    process and constant nu:

        exp(nu w_t - nu^2 t / 2) * heat_solution(a, psi, t, x)

    t must be a sample time of the path.
    """
    if path.R != 1:
        raise OracleError(f"geometric_solution needs exactly one Wiener process, got R={path.R}.")
    w = float(path.value_at(t)[0])
    return np.exp(nu * w - 0.5 * nu**2 * t) * heat_solution(a, psi, t, x)


@dataclass
class OracleProblem:
    """
    A reference selector: kind plus parameters.

    heat:                {"a", "psi"}
    advection_diffusion: {"a", "b", "c", "psi"}
    geometric:           {"a", "nu", "psi"}
    fine_reference:      {"dt_fine"}
    """

    kind: str
    params: dict = field(default_factory=dict)

    REQUIRED = {
        "heat": ("a", "psi"),
        "advection_diffusion": ("a", "b", "c", "psi"),
        "geometric": ("a", "nu", "psi"),
        "fine_reference": ("dt_fine",),
    }

    def __post_init__(self):
        if self.kind not in KINDS:
            raise OracleError(f"Unknown oracle kind '{self.kind}'. Use one of {KINDS}.")
        missing = [k for k in self.REQUIRED[self.kind] if k not in self.params]
        if missing:
            raise OracleError(f"Oracle '{self.kind}' misses parameters {missing}.")
        if "psi" in self.params:
            self.params["psi"] = _trig(self.params["psi"])
        if self.kind == "fine_reference" and not self.params["dt_fine"] > 0:
            raise OracleError("dt_fine must be positive.")

    @property
    def is_exact(self):
        return self.kind != "fine_reference"

    @property
    def needs_path(self):
        return self.kind == "geometric"

    def evaluate(self, t, x, path=None):
        """The exact solution at time t on the points x."""
        p = self.params
        if self.kind == "heat":
            return heat_solution(p["a"], p["psi"], t, x)
        if self.kind == "advection_diffusion":
            return advection_diffusion_solution(p["a"], p["b"], p["c"], p["psi"], t, x)
        if self.kind == "geometric":
            if path is None:
                raise OracleError("The geometric oracle needs the Brownian path.")
            return geometric_solution(p["a"], p["nu"], path, p["psi"], t, x)
        raise OracleError("fine_reference is not a pointwise oracle; use fine_reference().")

    def to_dict(self):
        out = {"kind": self.kind}
        for k, v in self.params.items():
            if hasattr(v, "to_dict"):
                v = v.to_dict()
            elif isinstance(v, np.ndarray):
                v = v.tolist()
            out[k] = v
        return out


def fine_reference(problem, grid, path, dt_fine, dt=None, record_times=None):
    """
    The same semidiscrete system on the same grid, integrated with
    the finer step dt_fine along the same Brownian realization.

    Parameters
    ----------
    problem: ProblemSpec
    grid: TorusGrid
    path: BrownianPath
        A path whose step count is a multiple of T / dt_fine.
    dt_fine: float
    dt: None or float
        The study step; dt_fine must divide it.
    record_times: None or iterable of float
    """
    if dt is not None:
        ratio = dt / dt_fine
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise OracleError(f"dt_fine={dt_fine} does not divide the study step dt={dt}.")
    config = SchemeConfig(method=problem.method, dt=dt_fine, cfl_check=True)
    steps = config.steps(problem.T)
    if path.N % steps:
        raise OracleError(
            f"The path has {path.N} steps; it cannot drive {steps} steps of dt_fine={dt_fine}."
        )
    path = coarsen_path(path, path.N // steps)
    logger.debug("Fine reference with %d steps on n=%d", steps, grid.n)
    return integrate(problem.stencil, problem, grid, path, config, record_times)
