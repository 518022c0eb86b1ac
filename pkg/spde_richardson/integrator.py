"""
Time stepping of the semidiscrete system

    du^h = (L^h u^h + f) dt + (nu^r u^h + g^r) dw^r

with explicit Euler-Maruyama or drift-implicit Euler. The noise is
always evaluated at the left endpoint (t, u).
"""
from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import spde_richardson.settings as settings
from spde_richardson.exceptions import (
    CflError,
    ConfigError,
    InstabilityError,
    IntegrationError,
    SolverError,
)
from spde_richardson.grid import GridCoefficients, GridFunction, apply_Lh, assemble_Lh
from spde_richardson.noise import coarsen_path
from spde_richardson.utils import scipy_version_is_at_least

logger = logging.getLogger(__name__)

EXPLICIT = "explicit-euler"
IMPLICIT = "drift-implicit-euler"
METHODS = (EXPLICIT, IMPLICIT)


@dataclass(frozen=True)
class SchemeConfig:
    """Time discretization: method, step and whether the CFL rule is enforced."""

    method: str = EXPLICIT
    dt: float = 1e-3
    cfl_check: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"Unknown method '{self.method}'. Use one of {METHODS}.")
        if not self.dt > 0:
            raise ConfigError("The time step must be positive.")

    def steps(self, T):
        """Number of steps covering [0, T]; dt must divide T."""
        steps = int(round(T / self.dt))
        if steps < 1 or abs(steps * self.dt - T) > 1e-9 * max(T, 1.0):
            raise ConfigError(f"dt={self.dt} does not divide T={T}.")
        return steps


class Trajectory:
    """
    Snapshots u^h_t of one integration.

    The attributes of Trajectory are:

    trajectory.times (list of float):
        The recorded times, increasing.
    trajectory.states (list of GridFunction):
        The solution at each recorded time, all on one grid.
    trajectory.manifest (dict):
        Run metadata: seed, replicate, method, dt, steps, h, n,
        cfl_margin.
    """

    def __init__(self, times, states, manifest=None):
        if len(times) != len(states):
            raise IntegrationError("times and states must have equal length.")
        grids = {state.grid for state in states}
        if len(grids) > 1:
            raise IntegrationError("All states of a trajectory must share one grid.")
        self.times = [float(t) for t in times]
        self.states = list(states)
        self.manifest = dict(manifest or {})

    @property
    def grid(self):
        return self.states[0].grid

    @property
    def final(self):
        return self.states[-1]

    def state_at(self, t):
        for time, state in zip(self.times, self.states):
            if np.isclose(time, t, rtol=1e-9, atol=1e-12):
                return state
        raise IntegrationError(f"No snapshot recorded at t={t}.")

    def map(self, fn):
        """A trajectory with fn applied to every state."""
        return Trajectory(self.times, [fn(s) for s in self.states], self.manifest)

    def to_frame(self):
        """Long format: t, x_1..x_d, value."""
        frames = []
        for t, state in zip(self.times, self.states):
            frame = state.to_frame()
            frame.insert(0, "t", t)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def __str__(self):
        vals = [
            f"times = [{', '.join(f'{t:.6g}' for t in self.times)}]",
            f"grid = {self.grid}",
            f"method = {self.manifest.get('method')}",
        ]
        return "<Trajectory: " + ", ".join(vals) + ">"


def _noise_term(nu, g, u, dw):
    # sum_r dw^r (nu^r u + g^r) on flat arrays: nu, g (N, R); u (N,)
    if dw.size == 0:
        return 0.0
    return (nu * u[:, None] + g) @ dw


def _grid_data(grid_fn, R, grid):
    if grid_fn is None:
        return np.zeros((grid.size, R))
    return grid_fn.flat.reshape(grid.size, R)


def step_explicit(spec, t, u, dt, dw, f_t=None, g_t=None):
    """
    One explicit Euler-Maruyama step:

        u' = u + dt (L^h u + f_t) + sum_r dw^r (nu^r_t u + g^r_t)

    Parameters
    ----------
    spec: StencilSpec
    t: float
    u: GridFunction
    dt: float
    dw: array_like of R increments
    f_t: None or GridFunction
        The forcing at time t.
    g_t: None or vector GridFunction
        The additive noise at time t, R components.
    """
    grid = u.grid
    dw = np.asarray(dw, dtype=float).reshape(-1)
    drift = apply_Lh(spec, t, u).flat
    if f_t is not None:
        drift = drift + f_t.flat
    nu = _nu_on_grid(spec, t, grid, dw.size)
    out = u.flat + dt * drift + _noise_term(nu, _grid_data(g_t, dw.size, grid), u.flat, dw)
    if not np.all(np.isfinite(out)):
        raise InstabilityError("Explicit step produced non-finite values", step=None)
    return GridFunction(grid, out.reshape(grid.shape))


def step_drift_implicit(spec, t, u, dt, dw, f_t=None, g_t=None):
    """
    One drift-implicit Euler step with explicit noise:

        (I - dt L^h_{t+dt}) u' = u + dt f_t + sum_r dw^r (nu^r_t u + g^r_t)
    """
    grid = u.grid
    dw = np.asarray(dw, dtype=float).reshape(-1)
    nu = _nu_on_grid(spec, t, grid, dw.size)
    rhs = u.flat + _noise_term(nu, _grid_data(g_t, dw.size, grid), u.flat, dw)
    if f_t is not None:
        rhs = rhs + dt * f_t.flat
    system = sp.identity(grid.size, format="csc") - dt * assemble_Lh(spec, t + dt, grid).tocsc()
    out = _solve(system, rhs, u.flat)
    return GridFunction(grid, out.reshape(grid.shape))


def _nu_on_grid(spec, t, grid, R):
    points = grid.points()
    if R == 0:
        return np.zeros((grid.size, 0))
    return np.stack([spec.nu(t, points, r) for r in range(R)], axis=1)


def _gmres_kwargs(tol):
    # scipy 1.12 renamed the relative tolerance keyword of gmres.
    if scipy_version_is_at_least("1.12"):
        return {"rtol": tol, "atol": 0.0}
    return {"tol": tol, "atol": 0.0}


def _solve(system, rhs, guess, factorization=None):
    if settings.IMPLICIT_SOLVER == "gmres":
        solution, info = spla.gmres(
            system,
            rhs,
            x0=guess,
            maxiter=settings.IMPLICIT_MAXITER,
            **_gmres_kwargs(settings.IMPLICIT_TOL),
        )
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
        return solution
    if factorization is not None:
        return factorization.solve(rhs)
    try:
        return spla.spsolve(system, rhs)
    except RuntimeError as e:
        raise SolverError(f"Sparse direct solve failed: {e}") from e


def cfl_margin(spec, grid, dt, T=0.0):
    """
    dt * (sum_l 2 sup a^l |l|^2 / h^2 + sum_g sup p^g / h + sum_g sup |c^g|),
    with sups over the grid points at t = 0 (and at a few times up
    to T for time-dependent stencils). Explicit stepping needs a
    margin <= 1.
    """
    times = [0.0] if spec.time_independent or T <= 0 else np.linspace(0.0, T, 5)
    worst = 0.0
    h = grid.h
    for t in times:
        coefficients = GridCoefficients(spec, t, grid)
        total = sum(
            2 * float(a.max(initial=0.0)) * vec.norm2() / h**2
            for vec, a in coefficients.a.items()
        )
        total += sum(float(p.max(initial=0.0)) / h for p in coefficients.p.values())
        total += sum(float(np.abs(c).max(initial=0.0)) for c in coefficients.c.values())
        worst = max(worst, dt * total)
    return worst


class BaseStepper:
    """
    Advances flat solution arrays on one grid. step() wraps _step()
    and annotates failures with the step index and time.
    """

    def __init__(self, spec, problem, grid, dt):
        """
        Parameters
        ----------
        spec: StencilSpec
            The stencil of L^h.
        problem: ProblemSpec or PdeCoefficients
            Provides the forcing f, the additive noise g and R.
        grid: TorusGrid
        dt: float
        """
        self.spec = spec
        self.coefficients = getattr(problem, "coefficients", problem)
        self.grid = grid
        self.dt = dt
        self.R = self.coefficients.R
        self.points = grid.points()
        self.frozen = spec.time_independent and self.coefficients.time_independent
        self._matrix = None
        self._data = None

    def operator(self, t):
        if self.frozen:
            if self._matrix is None:
                self._matrix = assemble_Lh(self.spec, t, self.grid)
            return self._matrix
        return assemble_Lh(self.spec, t, self.grid)

    def data(self, t):
        """(f, g, nu) on the grid at time t: shapes (N,), (N, R), (N, R)."""
        if self.frozen and self._data is not None:
            return self._data
        f = self.coefficients.f_at(t, self.points)
        g = self.coefficients.g_at(t, self.points)
        nu = _nu_on_grid(self.spec, t, self.grid, self.R)
        data = (f, g, nu)
        if self.frozen:
            self._data = data
        return data

    def step(self, n, t, u, dw):
        try:
            out = self._step(t, u, dw)
        except SolverError as e:
            raise SolverError(str(e), step=n, time=t) from e
        if not np.all(np.isfinite(out)):
            raise InstabilityError("Non-finite values in the solution", step=n, time=t)
        return out

    def _step(self, t, u, dw):
        raise NotImplementedError


class ExplicitEulerStepper(BaseStepper):
    method = EXPLICIT

    def _step(self, t, u, dw):
        f, g, nu = self.data(t)
        return u + self.dt * (self.operator(t) @ u + f) + _noise_term(nu, g, u, dw)


class DriftImplicitStepper(BaseStepper):
    method = IMPLICIT

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._system = None
        self._factorization = None

    def system(self, t):
        if self.frozen and self._system is not None:
            return self._system
        identity = sp.identity(self.grid.size, format="csc")
        system = (identity - self.dt * self.operator(t + self.dt)).tocsc()
        if self.frozen:
            self._system = system
            if settings.IMPLICIT_SOLVER == "direct":
                self._factorization = spla.splu(system)
        return system

    def _step(self, t, u, dw):
        f, g, nu = self.data(t)
        rhs = u + self.dt * f + _noise_term(nu, g, u, dw)
        system = self.system(t)
        return _solve(system, rhs, u, self._factorization)


STEPPERS = {EXPLICIT: ExplicitEulerStepper, IMPLICIT: DriftImplicitStepper}


class Integrator:
    # Hooks around every step; subclass and override when needed.
    def __init__(self, stepper):
        self.stepper = stepper

    def before_step(self, n, t, u):
        pass

    def after_step(self, n, t, u):
        pass

    def run(self, u0, increments, record_steps):
        dt = self.stepper.dt
        u = u0
        records = {}
        if 0 in record_steps:
            records[0] = u.copy()
        for n, dw in enumerate(increments):
            t = n * dt
            self.before_step(n, t, u)
            u = self.stepper.step(n, t, u, dw)
            self.after_step(n, t, u)
            if n + 1 in record_steps:
                records[n + 1] = u.copy()
        return records


def _record_steps(record_times, dt, steps):
    out = []
    for t in record_times:
        n = int(round(t / dt))
        if n < 0 or n > steps or abs(n * dt - t) > 1e-9 * max(abs(t), dt):
            raise IntegrationError(f"Record time t={t} is not on the time grid (dt={dt}).")
        out.append(n)
    return out


def integrate(spec, problem, grid, path, config, record_times=None, integrator_class=Integrator):
    """
    Integrate from u_0 = psi on the grid along a Brownian path.

    Parameters
    ----------
    spec: StencilSpec
    problem: ProblemSpec
        Provides T, psi, f, g and R (via problem.coefficients).
    grid: TorusGrid
    path: BrownianPath
        Its step count must be a multiple of the number of time
        steps; it is coarsened to the time grid of `config`.
    config: SchemeConfig
    record_times: None or iterable of float
        Times to record, on the time grid. Defaults to (T,).
    integrator_class: type
        Integrator subclass providing before/after step hooks.

    Returns
    -------
    Trajectory
    """
    coefficients = problem.coefficients
    T = problem.T
    steps = config.steps(T)
    if not np.isclose(path.T, T, rtol=1e-9):
        raise IntegrationError(f"Path horizon {path.T} differs from T={T}.")
    if path.R != coefficients.R:
        raise IntegrationError(f"Path has R={path.R} processes, the problem needs {coefficients.R}.")
    if path.N % steps:
        raise IntegrationError(
            f"The path has {path.N} steps, not a multiple of the {steps} steps of dt={config.dt}."
        )
    path = coarsen_path(path, path.N // steps)

    margin = cfl_margin(spec, grid, config.dt, T)
    logger.debug("CFL margin %.4g (n=%d, dt=%.4g)", margin, grid.n, config.dt)
    if config.method == EXPLICIT and config.cfl_check:
        if margin > settings.CFL_LIMIT:
            raise CflError(
                f"CFL margin {margin:.4g} exceeds {settings.CFL_LIMIT} for explicit stepping",
                step=0,
                time=0.0,
            )
        if margin > settings.CFL_WARN:
            logger.warning("CFL margin %.3g is close to the limit.", margin)

    record_times = [T] if record_times is None else sorted(record_times)
    record_steps = _record_steps(record_times, config.dt, steps)

    stepper = STEPPERS[config.method](spec, problem, grid, config.dt)
    u0 = coefficients.psi_at(grid.points())
    records = integrator_class(stepper).run(u0, path.increments, set(record_steps))

    manifest = {
        "seed": path.seed,
        "replicate": path.replicate,
        "method": config.method,
        "dt": config.dt,
        "steps": steps,
        "T": T,
        "n": grid.n,
        "h": grid.h,
        "d": grid.d,
        "R": coefficients.R,
        "cfl_margin": margin,
    }
    states = [GridFunction(grid, records[n].reshape(grid.shape)) for n in record_steps]
    return Trajectory(record_times, states, manifest)
