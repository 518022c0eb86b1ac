"""
Problem definitions: continuum data, stencil, torus, time horizon,
time-stepping policy and reference, plus the named presets used by
the studies and the command line.
"""
from dataclasses import dataclass, field, replace
import logging
import math

from spde_richardson.exceptions import ConfigError
from spde_richardson.fields import (
    ArrayField,
    TrigField,
    TrigPolynomial,
    field_to_dict,
    parse_field,
)
from spde_richardson.grid import TorusGrid
from spde_richardson.integrator import EXPLICIT, METHODS, SchemeConfig
from spde_richardson.oracle import OracleProblem
from spde_richardson.stencil import (
    PdeCoefficients,
    build_diagdom_stencil,
    build_diagonal_stencil,
    stencil_from_dict,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DtPolicy:
    """
    How the number of time steps depends on the grid.

    kind "parabolic": steps(n) = m n^2 with the smallest integer m
        such that dt <= ratio * h^2. dt is exactly proportional
        to h^2 across nested grids.
    kind "fixed": steps(n) = steps for every n.
    """

    kind: str = "parabolic"
    ratio: float = 0.2
    steps: int = None

    def __post_init__(self):
        if self.kind not in ("parabolic", "fixed"):
            raise ConfigError(f"Unknown dt policy '{self.kind}'. Use 'parabolic' or 'fixed'.")
        if self.kind == "parabolic" and not self.ratio > 0:
            raise ConfigError("The parabolic dt ratio must be positive.")
        if self.kind == "fixed" and (self.steps is None or int(self.steps) < 1):
            raise ConfigError("The fixed dt policy needs steps >= 1.")

    def steps_for(self, n, T, period):
        if self.kind == "fixed":
            return int(self.steps)
        m = max(1, math.ceil(T / (self.ratio * period**2) - 1e-12))
        return m * n * n

    def to_dict(self):
        if self.kind == "fixed":
            return {"policy": "fixed", "steps": int(self.steps)}
        return {"policy": "parabolic", "ratio": self.ratio}


@dataclass
class ProblemSpec:
    """
    A complete problem: continuum data, its stencil, the torus
    [0, period)^d, the horizon T, the time-stepping method and dt
    policy, and an optional reference (oracle).
    """

    name: str
    coefficients: PdeCoefficients
    stencil: object
    period: float = 1.0
    T: float = 0.1
    method: str = EXPLICIT
    dt_policy: DtPolicy = field(default_factory=DtPolicy)
    oracle: OracleProblem = None
    n0: int = 16
    description: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"Unknown method '{self.method}'. Use one of {METHODS}.")
        if not self.T > 0:
            raise ConfigError("The time horizon T must be positive.")
        if not self.period > 0:
            raise ConfigError("The period L must be positive.")
        if self.stencil.d != self.coefficients.d:
            raise ConfigError("Stencil and coefficient dimensions differ.")
        if self.stencil.R != self.coefficients.R:
            raise ConfigError(
                f"The stencil has R={self.stencil.R} noise multipliers, "
                f"the coefficients R={self.coefficients.R}."
            )

    @property
    def d(self):
        return self.coefficients.d

    @property
    def R(self):
        return self.coefficients.R

    def grid(self, n):
        return TorusGrid(self.d, n, self.period)

    def steps_for(self, n):
        return self.dt_policy.steps_for(n, self.T, self.period)

    def scheme_for(self, grid, method=None):
        method = method or self.method
        return SchemeConfig(
            method=method, dt=self.T / self.steps_for(grid.n), cfl_check=method == EXPLICIT
        )

    def with_stencil(self, stencil):
        return replace(self, stencil=stencil)

    def __str__(self):
        vals = [
            f"name = {self.name}",
            f"d = {self.d}",
            f"R = {self.R}",
            f"L = {self.period:.6g}",
            f"T = {self.T:.6g}",
            f"method = {self.method}",
            f"oracle = {self.oracle.kind if self.oracle else None}",
        ]
        return "<ProblemSpec: " + ", ".join(vals) + ">"


def _sine(period=1.0, amplitude=1.0, k=1, constant=0.0):
    return TrigPolynomial([(amplitude, [k], "sin")], constant=constant, period=period)


def heat_problem():
    psi = TrigPolynomial([(1.0, [1], "sin"), (0.5, [2], "cos")], period=1.0)
    coefficients = PdeCoefficients(d=1, a=1.0, b=0.0, c=0.0, psi=psi)
    return ProblemSpec(
        name="heat",
        coefficients=coefficients,
        stencil=build_diagonal_stencil([1.0], [0.0], 0.0, [0.0]),
        T=0.05,
        dt_policy=DtPolicy("parabolic", ratio=0.2),
        oracle=OracleProblem("heat", {"a": [[1.0]], "psi": psi}),
        n0=32,
        description="deterministic heat equation, central second difference",
    )


def zero_problem():
    problem = heat_problem()
    psi = TrigPolynomial([], period=1.0)
    problem.name = "zero"
    problem.coefficients = PdeCoefficients(d=1, a=1.0, psi=psi)
    problem.oracle = OracleProblem("heat", {"a": [[1.0]], "psi": psi})
    problem.n0 = 8
    problem.description = "heat equation with zero data"
    return problem


def upwind_problem():
    a, b, theta = 0.05, 0.5, 0.25
    psi = _sine()
    coefficients = PdeCoefficients(d=1, a=a, b=b, psi=psi)
    return ProblemSpec(
        name="upwind",
        coefficients=coefficients,
        stencil=build_diagonal_stencil([a], [b], 0.0, [theta]),
        T=0.1,
        dt_policy=DtPolicy("parabolic", ratio=1.0),
        oracle=OracleProblem("advection_diffusion", {"a": [[a]], "b": [b], "c": 0.0, "psi": psi}),
        n0=32,
        description="advection-diffusion with one-sided (upwinded) first differences",
    )


def geometric_problem():
    nu = 0.5
    psi = _sine()
    coefficients = PdeCoefficients(d=1, a=1.0, nu=[nu], psi=psi, R=1)
    return ProblemSpec(
        name="geometric",
        coefficients=coefficients,
        stencil=build_diagonal_stencil([1.0], [0.0], 0.0, [0.0], nu=[nu], R=1),
        T=0.05,
        dt_policy=DtPolicy("fixed", steps=2**14),
        oracle=OracleProblem("geometric", {"a": [[1.0]], "nu": nu, "psi": psi}),
        n0=8,
        description="stochastic heat equation with multiplicative noise nu u dw",
    )


def degenerate_problem():
    nu = 0.5
    psi = _sine(amplitude=0.5, constant=1.0)
    coefficients = PdeCoefficients(d=1, a=0.0, nu=[nu], psi=psi, R=1)
    return ProblemSpec(
        name="degenerate",
        coefficients=coefficients,
        stencil=build_diagonal_stencil([0.0], [0.0], 0.0, [0.0], nu=[nu], R=1),
        T=1.0,
        dt_policy=DtPolicy("fixed", steps=256),
        oracle=OracleProblem("geometric", {"a": [[0.0]], "nu": nu, "psi": psi}),
        n0=8,
        description="fully degenerate equation du = nu u dw",
    )


def anisotropic_problem():
    a = [[1.0, 0.5], [0.5, 1.0]]
    psi = TrigPolynomial([(1.0, [1, 1], "sin"), (0.5, [1, -1], "cos")], period=1.0)
    coefficients = PdeCoefficients(d=2, a=a, psi=psi)
    return ProblemSpec(
        name="anisotropic",
        coefficients=coefficients,
        stencil=build_diagdom_stencil(a, [0.0, 0.0], 0.0, kappa=0.0),
        T=0.01,
        dt_policy=DtPolicy("parabolic", ratio=0.1),
        oracle=OracleProblem("heat", {"a": a, "psi": psi}),
        n0=8,
        description="two-dimensional heat equation with a diagonally dominant matrix",
    )


def variable_problem():
    a_diag = TrigField(offset=0.5, amplitude=0.25)
    b = TrigField(offset=0.0, amplitude=0.3, function="cos")
    nu, g = [0.2], [TrigField(offset=0.0, amplitude=0.1)]
    psi = _sine()
    coefficients = PdeCoefficients(d=1, a=a_diag, b=b, nu=nu, g=g, psi=psi, R=1)
    return ProblemSpec(
        name="variable",
        coefficients=coefficients,
        stencil=build_diagonal_stencil([a_diag], [b], 0.0, [0.5], nu=nu, R=1),
        T=0.05,
        dt_policy=DtPolicy("parabolic", ratio=0.2),
        oracle=None,
        n0=16,
        description="variable coefficients with multiplicative and additive noise",
    )


PRESETS = {
    "zero": zero_problem,
    "heat": heat_problem,
    "upwind": upwind_problem,
    "geometric": geometric_problem,
    "degenerate": degenerate_problem,
    "anisotropic": anisotropic_problem,
    "variable": variable_problem,
}


def build_preset(name):
    """Return a fresh instance of a named preset problem."""
    if name not in PRESETS:
        raise ConfigError(f"Unknown problem preset '{name}'. Use one of {sorted(PRESETS)}.")
    return PRESETS[name]()


def _diagonal_of(a, d):
    a = parse_field(a)
    if isinstance(a, ArrayField) and a.shape == (d, d):
        return [field_to_dict(a.entries[i, i]) for i in range(d)]
    if isinstance(a, ArrayField) and a.shape == (d,):
        return field_to_dict(a)
    return [field_to_dict(a)] * d


def _stencil_for(coefficients, section):
    section = dict(section)
    constructor = section.get("constructor", "diagonal")
    base = {"d": coefficients.d, "R": coefficients.R}
    if coefficients.nu is not None:
        base["nu"] = field_to_dict(coefficients.nu)
    if constructor == "diagonal":
        base.update(
            a_diag=_diagonal_of(coefficients.a, coefficients.d),
            b=field_to_dict(coefficients.b),
            c=field_to_dict(coefficients.c),
        )
    elif constructor == "diagdom":
        base.update(
            a=field_to_dict(coefficients.a),
            b=field_to_dict(coefficients.b),
            c=field_to_dict(coefficients.c),
        )
    base.update(section)
    base["constructor"] = constructor
    return stencil_from_dict(base)


def dt_policy_from_dict(section, default=None):
    policy = section.get("policy")
    if policy is None:
        return default or DtPolicy()
    if policy == "fixed":
        return DtPolicy("fixed", steps=section.get("steps"))
    return DtPolicy(policy, ratio=section.get("ratio", 0.2))


def problem_from_dict(sections):
    """
    Build a ProblemSpec from the [problem], [stencil], [grid], [time]
    and [noise] sections of a run config.

    [problem] either names a preset (`preset = "upwind"`) or gives
    the coefficient fields a, b, c, f, g, nu, psi explicitly together
    with an optional `oracle` table. A [stencil] section rebuilds
    the stencil; for explicit problems it defaults to the diagonal
    constructor with the coefficients of [problem].
    """
    problem_section = dict(sections.get("problem", {}))
    stencil_section = sections.get("stencil")
    grid_section = sections.get("grid", {})
    time_section = sections.get("time", {})
    noise_section = sections.get("noise", {})

    preset = problem_section.pop("preset", None)
    if preset is not None:
        if problem_section:
            raise ConfigError(
                f"A preset problem takes no coefficient keys, got {sorted(problem_section)}."
            )
        problem = build_preset(preset)
        if "d" in grid_section and int(grid_section["d"]) != problem.d:
            raise ConfigError(f"Preset '{preset}' is {problem.d}-dimensional.")
        if "L" in grid_section and float(grid_section["L"]) != problem.period:
            raise ConfigError(f"Preset '{preset}' has period {problem.period}.")
        if "R" in noise_section and int(noise_section["R"]) != problem.R:
            raise ConfigError(f"Preset '{preset}' has R={problem.R}.")
        if stencil_section:
            problem.stencil = _stencil_for(problem.coefficients, stencil_section)
    else:
        d = int(grid_section.get("d", 1))
        R = int(noise_section.get("R", 0))
        oracle = problem_section.pop("oracle", None)
        name = problem_section.pop("name", "custom")
        unknown = set(problem_section) - {"a", "b", "c", "f", "g", "nu", "psi"}
        if unknown:
            raise ConfigError(f"Unknown [problem] keys: {sorted(unknown)}.")
        if "a" not in problem_section:
            raise ConfigError("An explicit problem needs the diffusion field 'a'.")
        coefficients = PdeCoefficients(d=d, R=R, **problem_section)
        problem = ProblemSpec(
            name=name,
            coefficients=coefficients,
            stencil=_stencil_for(coefficients, stencil_section or {}),
            period=float(grid_section.get("L", 1.0)),
            oracle=OracleProblem(oracle["kind"], {k: v for k, v in oracle.items() if k != "kind"})
            if oracle
            else None,
        )

    if "T" in time_section:
        problem.T = float(time_section["T"])
    if "method" in time_section:
        problem.method = time_section["method"]
    problem.dt_policy = dt_policy_from_dict(time_section, problem.dt_policy)
    if "n" in grid_section:
        problem.n0 = int(grid_section["n"])
    ProblemSpec.__post_init__(problem)
    return problem

