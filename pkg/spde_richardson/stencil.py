"""
Finite-difference stencils of the operator

    L^h = sum_{l in Lambda_0} delta_{-h,l}(a^l delta_{h,l} .)
        + sum_{g in Lambda_1} p^g delta_{h,g} .
        + sum_{g in Lambda_1} c^g T_{h,g} .

and the constructors for diagonal and diagonally dominant
diffusion matrices.

Coefficient providers have the signature

    provider(t, x, h, vector) -> array of shape (N,)

for a batch of points x of shape (N, d) and a mesh h >= 0. The
noise multiplier has the signature nu(t, x, r) -> (N,) for
r = 0..R-1.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

import spde_richardson.settings as settings
from spde_richardson.exceptions import ConfigError, StencilError
from spde_richardson.fields import (
    evaluate_field,
    field_to_dict,
    is_time_independent,
    parse_field,
)
from spde_richardson.utils import as_points

logger = logging.getLogger(__name__)

TOLERANCE = 1e-12


@dataclass(frozen=True, order=True)
class StencilVector:
    """An integer lattice offset (lambda or gamma)."""

    coords: tuple

    def __post_init__(self):
        coords = tuple(self.coords)
        if len(coords) < 1:
            raise StencilError("A stencil vector needs at least one coordinate.")
        if any(float(c) != int(c) for c in coords):
            raise StencilError(f"Stencil vector {coords} has non-integer entries.")
        object.__setattr__(self, "coords", tuple(int(c) for c in coords))

    @classmethod
    def unit(cls, i, d):
        coords = [0] * d
        coords[i] = 1
        return cls(tuple(coords))

    @classmethod
    def zero(cls, d):
        return cls((0,) * d)

    @property
    def d(self):
        return len(self.coords)

    @property
    def is_zero(self):
        return not any(self.coords)

    @property
    def reach(self):
        return max(abs(c) for c in self.coords)

    def norm2(self):
        return sum(c * c for c in self.coords)

    def array(self):
        return np.array(self.coords, dtype=float)

    def __neg__(self):
        return StencilVector(tuple(-c for c in self.coords))

    def __add__(self, other):
        return StencilVector(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        return self + (-other)

    def __str__(self):
        return "(" + ",".join(str(c) for c in self.coords) + ")"


def as_vector(obj):
    if isinstance(obj, StencilVector):
        return obj
    if isinstance(obj, (int, np.integer)):
        return StencilVector((obj,))
    return StencilVector(tuple(obj))


class CoefficientTable:
    """
    Coefficient provider backed by a mapping
    vector -> callable(t, x, h) -> (N,). Vectors that are
    not in the table have a zero coefficient.
    """

    def __init__(self, entries=None):
        self.entries = {as_vector(k): v for k, v in (entries or {}).items()}

    def __call__(self, t, x, h, vector):
        x = as_points(x)
        entry = self.entries.get(as_vector(vector))
        if entry is None:
            return np.zeros(x.shape[0])
        return np.broadcast_to(
            np.asarray(entry(t, x, h), dtype=float), (x.shape[0],)
        ).copy()


class NoiseMultiplier:
    """nu(t, x, r) from an R-vector field."""

    def __init__(self, nu, R):
        self.field = nu
        self.R = R

    def __call__(self, t, x, r):
        return evaluate_field(self.field, t, x, (self.R,))[:, r]


def _zero_nu(t, x, r):
    return np.zeros(as_points(x).shape[0])


@dataclass(frozen=True)
class StencilSpec:
    """
    The stencil sets and coefficient providers of L^h.

    Immutable after construction; providers are pure functions of
    (t, x, h, vector) so they may be evaluated concurrently.
    `recipe` is the dict a stencil is rebuilt from (see
    stencil_to_dict) and `tags` carries free-form labels such as
    the weight parameters of a transformed stencil.
    """

    d: int
    lambda0: tuple
    lambda1: tuple
    a_coeff: object
    p_coeff: object
    c_coeff: object
    nu: object = None
    R: int = 0
    time_independent: bool = False
    recipe: dict = None
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("lambda0", "lambda1"):
            vectors = tuple(sorted({as_vector(v) for v in getattr(self, name)}))
            object.__setattr__(self, name, vectors)
        if self.nu is None:
            object.__setattr__(self, "nu", _zero_nu)
        if self.R < 0:
            raise StencilError("The number of Wiener processes R must be >= 0.")

    @property
    def reach(self):
        vectors = self.lambda0 + self.lambda1
        return max((v.reach for v in vectors), default=0)

    def __str__(self):
        vals = [
            f"d = {self.d}",
            f"lambda0 = [{', '.join(str(v) for v in self.lambda0)}]",
            f"lambda1 = [{', '.join(str(v) for v in self.lambda1)}]",
            f"R = {self.R}",
            f"constructor = {(self.recipe or {}).get('constructor')}",
        ]
        return "<StencilSpec: " + ", ".join(vals) + ">"


@dataclass
class PdeCoefficients:
    """
    Continuum data of du = (a^{ij} u_{ij} + b^i u_i + c u + f) dt
    + (nu^r u + g^r) dw^r with u(0) = psi.

    Every entry is a field (t, x) -> values; see spde_richardson.fields.
    """

    d: int
    a: object
    b: object = 0.0
    c: object = 0.0
    f: object = 0.0
    g: object = None
    nu: object = None
    psi: object = 0.0
    R: int = 0

    def __post_init__(self):
        for name in ("a", "b", "c", "f", "g", "nu", "psi"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, parse_field(value))

    @property
    def time_independent(self):
        return is_time_independent(self.a, self.b, self.c, self.f, self.g, self.nu)

    def a_at(self, t, x):
        return evaluate_field(self.a, t, x, (self.d, self.d))

    def b_at(self, t, x):
        return evaluate_field(self.b, t, x, (self.d,))

    def c_at(self, t, x):
        return evaluate_field(self.c, t, x)

    def f_at(self, t, x):
        return evaluate_field(self.f, t, x)

    def g_at(self, t, x):
        return evaluate_field(self.g, t, x, (self.R,))

    def nu_at(self, t, x):
        return evaluate_field(self.nu, t, x, (self.R,))

    def psi_at(self, x):
        return evaluate_field(self.psi, 0.0, x)

    def check(self, sample=None):
        """
        Return the violations of symmetry and positive
        semidefiniteness of a over the sample.
        """
        if sample is None:
            sample = default_sample(self.d)
        violations = []
        for t in sample.times:
            a = self.a_at(t, sample.points)
            scale = max(1.0, float(np.abs(a).max(initial=0.0)))
            if np.abs(a - np.swapaxes(a, 1, 2)).max(initial=0.0) > TOLERANCE * scale:
                violations.append(f"a not symmetric at t={t:.6g}")
                continue
            eig_min = np.linalg.eigvalsh(a).min(initial=0.0)
            if eig_min < -1e-10 * scale:
                violations.append(
                    f"a not positive semidefinite at t={t:.6g} (eigenvalue {eig_min:.3g})"
                )
        return violations

    def to_dict(self):
        return {
            "d": self.d,
            "R": self.R,
            **{
                name: field_to_dict(getattr(self, name))
                for name in ("a", "b", "c", "f", "g", "nu", "psi")
                if getattr(self, name) is not None
            },
        }


@dataclass
class StencilSample:
    """Times, points and meshes at which providers are checked."""

    times: np.ndarray
    points: np.ndarray
    meshes: np.ndarray

    def __iter__(self):
        for t in self.times:
            for h in self.meshes:
                yield float(t), float(h)


def default_sample(d, period=None, h_max=0.1, T=1.0, size=None, seed=None):
    """
    A reproducible sample of (t, x, h).

    Parameters
    ----------
    d: int
        The dimension.
    period: None or float
        Points are drawn from [0, period)^d when given, otherwise
        from the box [-SAMPLE_BOX, SAMPLE_BOX]^d.
    h_max: float
        Meshes are 0, h_max/2 and h_max.
    T: float
        Times are 0, T and a random time in between.
    size: None or int
        Number of points (settings.SAMPLE_SIZE by default).
    seed: None or int
        Seed of the sample (settings.SAMPLE_SEED by default).
    """
    size = settings.SAMPLE_SIZE if size is None else size
    seed = settings.SAMPLE_SEED if seed is None else seed
    rng = np.random.default_rng(seed)
    if period is None:
        points = rng.uniform(-settings.SAMPLE_BOX, settings.SAMPLE_BOX, size=(size, d))
    else:
        points = rng.uniform(0.0, period, size=(size, d))
    times = np.array([0.0, rng.uniform(0.0, T), T])
    meshes = np.array([0.0, h_max / 2, h_max])
    return StencilSample(times=times, points=points, meshes=meshes)


class ValidationReport:
    """
    The result of validate_stencil.

    report.violations (list of str):
        Broken structural rules; empty when the stencil is valid.
    report.notes (list of str):
        Rules that hold by construction.
    """

    def __init__(self, violations=None, notes=None):
        self.violations = list(violations or [])
        self.notes = list(notes or [])

    @property
    def ok(self):
        return not self.violations

    def __str__(self):
        vals = [f"ok = {self.ok}"] + [f"violation: {v}" for v in self.violations]
        return "<ValidationReport: " + ", ".join(vals) + ">"


def validate_stencil(spec, sample=None):
    """
    Check the structural rules of a stencil: Lambda_1 symmetric
    about the origin, 0 in Lambda_1 but not in Lambda_0, and
    p^0 = 0 on the sample. Never raises.
    """
    violations = []
    zero = StencilVector.zero(spec.d)
    for name, vectors in (("Λ_0", spec.lambda0), ("Λ_1", spec.lambda1)):
        wrong = [str(v) for v in vectors if v.d != spec.d]
        if wrong:
            violations.append(f"{name} has vectors of wrong dimension: {', '.join(wrong)}")
    if zero in spec.lambda0:
        violations.append("0 ∈ Λ_0")
    if zero not in spec.lambda1:
        violations.append("0 ∉ Λ_1")
    missing = [str(-v) for v in spec.lambda1 if -v not in spec.lambda1]
    if missing:
        violations.append(f"Λ_1 not symmetric: missing {', '.join(missing)}")

    if sample is None:
        sample = default_sample(spec.d)
    try:
        worst = max(
            float(np.abs(spec.p_coeff(t, sample.points, h, zero)).max(initial=0.0))
            for t, h in sample
        )
    except Exception as e:  # provider failures are reported, not raised
        violations.append(f"provider evaluation failed: {e}")
    else:
        if worst > 0.0:
            violations.append(f"𝔭^0 ≠ 0 (max |𝔭^0| = {worst:.3g})")

    notes = ["rational dependence of Λ: satisfied by construction (integer offsets)"]
    return ValidationReport(violations, notes)


def reconstruct_pde(spec, t, x):
    """
    The continuum coefficients induced by the h = 0 stencil:

        a^{ij} = sum_l a_0^l l^i l^j,  b^i = sum_g p_0^g g^i,  c = sum_g c_0^g

    Parameters
    ----------
    spec: StencilSpec
    t: float
    x: array_like of shape (d,)

    Returns
    -------
    (a, b, c): ((d, d) array, (d,) array, float)
    """
    x = as_points(x, spec.d)
    a = np.zeros((spec.d, spec.d))
    for vec in spec.lambda0:
        lam = vec.array()
        a += spec.a_coeff(t, x, 0.0, vec)[0] * np.outer(lam, lam)
    b = np.zeros(spec.d)
    c = 0.0
    for vec in spec.lambda1:
        b += spec.p_coeff(t, x, 0.0, vec)[0] * vec.array()
        c += spec.c_coeff(t, x, 0.0, vec)[0]
    return a, b, float(c)


def _infer_dimension(*fields):
    for f in fields:
        shape = getattr(f, "shape", None)
        if shape:
            return shape[0]
    return 1


def _vector_entry(vector_field, i, d, scale=1.0, shift=None):
    # (t, x, h) -> scale * vector_field_i + shift_i
    def entry(t, x, h):
        value = scale * evaluate_field(vector_field, t, x, (d,))[:, i]
        if shift is not None:
            value = value + evaluate_field(shift, t, x, (d,))[:, i]
        return value

    return entry


def _scalar_entry(scalar_field):
    def entry(t, x, h):
        return evaluate_field(scalar_field, t, x)

    return entry


def _noise(nu, R):
    if R == 0:
        return None
    return NoiseMultiplier(nu, R)


def _recipe(**entries):
    # None when some field is a plain callable.
    try:
        return {
            k: field_to_dict(v) if hasattr(v, "to_dict") else v
            for k, v in entries.items()
        }
    except ConfigError:
        return None


def build_diagonal_stencil(a_diag, b, c, theta, nu=None, R=0, d=None, sample=None):
    """
    The stencil of a diagonal diffusion matrix:

        Lambda_0 = {e_i},  Lambda_1 = {0} U {+-e_i},
        a^{e_i} = a^{ii},  p^{e_i} = b^i + theta^i,  p^{-e_i} = theta^i,  c^0 = c.

    Parameters
    ----------
    a_diag: field of d-vectors
        The diagonal of the diffusion matrix.
    b: field of d-vectors
        The drift.
    c: scalar field
        The zero-order coefficient.
    theta: field of d-vectors
        Upwinding shifts; must satisfy theta^i >= max(0, -b^i).
    nu: None or field of R-vectors
        Multiplicative noise coefficients.
    R: int
        Number of Wiener processes.
    d: None or int
        The dimension, inferred from the array fields when None.
    sample: None or StencilSample
        Where the shift precondition is checked.
    """
    a_diag, b, c, theta = (parse_field(v) for v in (a_diag, b, c, theta))
    nu = parse_field(nu) if nu is not None else None
    d = d or _infer_dimension(a_diag, b, theta)
    if sample is None:
        sample = default_sample(d)

    for t in sample.times:
        th = evaluate_field(theta, t, sample.points, (d,))
        bb = evaluate_field(b, t, sample.points, (d,))
        slack = th - np.maximum(0.0, -bb)
        if slack.min(initial=0.0) < -TOLERANCE:
            raise StencilError(
                f"theta violates theta^i >= max(0, -b^i) at t={t:.6g} "
                f"(worst slack {slack.min():.3g})."
            )

    units = [StencilVector.unit(i, d) for i in range(d)]
    a_table = {e: _vector_entry(a_diag, i, d) for i, e in enumerate(units)}
    p_table = {}
    for i, e in enumerate(units):
        p_table[e] = _vector_entry(b, i, d, 1.0, theta)
        p_table[-e] = _vector_entry(theta, i, d)
    c_table = {StencilVector.zero(d): _scalar_entry(c)}

    return StencilSpec(
        d=d,
        lambda0=units,
        lambda1=[StencilVector.zero(d)] + units + [-e for e in units],
        a_coeff=CoefficientTable(a_table),
        p_coeff=CoefficientTable(p_table),
        c_coeff=CoefficientTable(c_table),
        nu=_noise(nu, R),
        R=R,
        time_independent=is_time_independent(a_diag, b, c, theta, nu),
        recipe=_recipe(
            constructor="diagonal", d=d, a_diag=a_diag, b=b, c=c, theta=theta,
            nu=nu, R=R,
        ),
    )


class DefaultShift:
    """theta^i(t, x) = kappa + |b^i(t, x)| / 2"""

    def __init__(self, b, kappa, d):
        self.b = b
        self.kappa = float(kappa)
        self.d = d
        self.time_dependent = getattr(b, "time_dependent", True)

    def __call__(self, t, x):
        return self.kappa + 0.5 * np.abs(evaluate_field(self.b, t, x, (self.d,)))


def _diagdom_weights(a):
    # Per-pair weights reproducing sum_l a^l l l^T = a exactly.
    n, d, _ = a.shape
    weights = {}
    off = np.abs(a) * (1 - np.eye(d))
    for i in range(d):
        weights[StencilVector.unit(i, d)] = a[:, i, i] - off[:, i, :].sum(axis=1)
    for i in range(d):
        for j in range(i + 1, d):
            ei, ej = StencilVector.unit(i, d), StencilVector.unit(j, d)
            weights[ei + ej] = np.maximum(a[:, i, j], 0.0)
            weights[ei - ej] = 0.5 * np.maximum(-a[:, i, j], 0.0)
            weights[ej - ei] = 0.5 * np.maximum(-a[:, i, j], 0.0)
    return weights


class _DiagdomEntry:
    def __init__(self, a, d, vector):
        self.a = a
        self.d = d
        self.vector = vector

    def __call__(self, t, x, h):
        return _diagdom_weights(evaluate_field(self.a, t, x, (self.d, self.d)))[
            self.vector
        ]


def build_diagdom_stencil(
    a, b, c, kappa, theta=None, theta_cross=None, nu=None, R=0, d=None, sample=None
):
    """
    The stencil of a diagonally dominant symmetric matrix
    (2 a^{ii} >= sum_j |a^{ij}|), possibly degenerate:

        Lambda_0 = {e_i} U {e_i + e_j, e_i - e_j, e_j - e_i : i < j}
        Lambda_1 = {0} U Lambda_0 U -Lambda_0

        a^{e_i}       = a^{ii} - sum_{j != i} |a^{ij}|
        a^{e_i+e_j}   = (a^{ij})^+
        a^{e_i-e_j}   = a^{e_j-e_i} = (a^{ij})^- / 2
        p^{+-e_i}     = +-b^i / 2 + theta^i
        p^{+-(e_i+-e_j)} = theta^{ij}
        c^0           = c

    Parameters
    ----------
    a: field of (d, d) matrices
    b: field of d-vectors
    c: scalar field
    kappa: float >= 0
        Lower bound enforced on the first-order weights through
        the default shifts theta^i = kappa + |b^i|/2 and
        theta^{ij} = kappa.
    theta: None or field of d-vectors
        Explicit shifts; must keep p^{+-e_i} nonnegative.
    theta_cross: None or scalar field
        Explicit cross shift theta^{ij}.
    nu, R, d, sample:
        As in build_diagonal_stencil.
    """
    if kappa < 0:
        raise StencilError("kappa must be nonnegative.")
    a, b, c = (parse_field(v) for v in (a, b, c))
    nu = parse_field(nu) if nu is not None else None
    d = d or _infer_dimension(a, b)
    if sample is None:
        sample = default_sample(d)

    for t in sample.times:
        mat = evaluate_field(a, t, sample.points, (d, d))
        scale = max(1.0, float(np.abs(mat).max(initial=0.0)))
        if np.abs(mat - np.swapaxes(mat, 1, 2)).max(initial=0.0) > TOLERANCE * scale:
            raise StencilError(f"a is not symmetric at t={t:.6g}.")
        diag = np.diagonal(mat, axis1=1, axis2=2)
        dominance = 2 * diag - np.abs(mat).sum(axis=2)
        if dominance.min(initial=0.0) < -TOLERANCE * scale:
            raise StencilError(
                f"a is not diagonally dominant at t={t:.6g} "
                f"(worst 2a^ii - sum_j |a^ij| = {dominance.min():.3g})."
            )

    recipe_theta = theta
    if theta is None:
        theta = DefaultShift(b, kappa, d)
    else:
        theta = parse_field(theta)
        for t in sample.times:
            th = evaluate_field(theta, t, sample.points, (d,))
            bb = evaluate_field(b, t, sample.points, (d,))
            if (th - 0.5 * np.abs(bb)).min(initial=0.0) < -TOLERANCE:
                raise StencilError(
                    f"theta gives negative first-order weights at t={t:.6g}; "
                    "theta^i >= |b^i|/2 is required."
                )
    theta_cross = parse_field(kappa if theta_cross is None else theta_cross)

    units = [StencilVector.unit(i, d) for i in range(d)]
    lambda0 = list(units)
    for i in range(d):
        for j in range(i + 1, d):
            lambda0 += [units[i] + units[j], units[i] - units[j], units[j] - units[i]]

    a_table = {vec: _DiagdomEntry(a, d, vec) for vec in lambda0}
    p_table = {}
    for i, e in enumerate(units):
        p_table[e] = _vector_entry(b, i, d, 0.5, theta)
        p_table[-e] = _vector_entry(b, i, d, -0.5, theta)
    for vec in lambda0[d:]:
        p_table[vec] = _scalar_entry(theta_cross)
        p_table[-vec] = _scalar_entry(theta_cross)
    c_table = {StencilVector.zero(d): _scalar_entry(c)}

    return StencilSpec(
        d=d,
        lambda0=lambda0,
        lambda1=[StencilVector.zero(d)] + lambda0 + [-v for v in lambda0],
        a_coeff=CoefficientTable(a_table),
        p_coeff=CoefficientTable(p_table),
        c_coeff=CoefficientTable(c_table),
        nu=_noise(nu, R),
        R=R,
        time_independent=is_time_independent(a, b, c, theta, theta_cross, nu),
        recipe=_recipe(
            constructor="diagdom", d=d, a=a, b=b, c=c, kappa=float(kappa),
            theta=parse_field(recipe_theta) if recipe_theta is not None else None,
            theta_cross=theta_cross, nu=nu, R=R,
        ),
    )


def build_explicit_stencil(lambda0, lambda1, a, p, c, nu=None, R=0, d=None):
    """
    A stencil given entry by entry.

    Parameters
    ----------
    lambda0, lambda1: iterables of integer vectors
    a, p, c: dict
        Map a vector to a scalar field (or its config form).
        Vectors that are not listed have zero coefficients.
    nu: None or field of R-vectors
    R: int
    d: None or int
        Inferred from the first vector of lambda1 when None.
    """
    lambda0 = [as_vector(v) for v in lambda0]
    lambda1 = [as_vector(v) for v in lambda1]
    d = d or (lambda1 or lambda0)[0].d
    tables = []
    fields_seen = []
    for table in (a, p, c):
        parsed = {as_vector(k): parse_field(v) for k, v in (table or {}).items()}
        fields_seen += list(parsed.values())
        tables.append(parsed)
    nu = parse_field(nu) if nu is not None else None

    try:
        recipe = {
            "constructor": "explicit",
            "d": d,
            "lambda0": [list(v.coords) for v in lambda0],
            "lambda1": [list(v.coords) for v in lambda1],
            **{
                name: [
                    {"vector": list(k.coords), "field": field_to_dict(v)}
                    for k, v in sorted(table.items())
                ]
                for name, table in zip(("a", "p", "c"), tables)
            },
            "nu": field_to_dict(nu) if nu is not None else None,
            "R": R,
        }
    except ConfigError:
        recipe = None

    a_table, p_table, c_table = (
        CoefficientTable({k: _scalar_entry(v) for k, v in table.items()})
        for table in tables
    )
    return StencilSpec(
        d=d,
        lambda0=lambda0,
        lambda1=lambda1,
        a_coeff=a_table,
        p_coeff=p_table,
        c_coeff=c_table,
        nu=_noise(nu, R),
        R=R,
        time_independent=is_time_independent(*fields_seen, nu),
        recipe=recipe,
    )


def check_lower_bound_p(spec, kappa, sample=None):
    """
    True iff p_h^g >= kappa for every g in Lambda_1 \\ {0}
    over the sample of (t, x, h).
    """
    if sample is None:
        sample = default_sample(spec.d)
    for t, h in sample:
        for vec in spec.lambda1:
            if vec.is_zero:
                continue
            if spec.p_coeff(t, sample.points, h, vec).min(initial=np.inf) < kappa - TOLERANCE:
                return False
    return True


class NonnegativityReport:
    """
    The result of sample_nonnegativity.

    report.violations (list of tuple):
        (kind, vector, t, h, minimum) for every coefficient that
        takes a negative value on the sample; kind is "a" or "p".
    """

    def __init__(self, violations=None):
        self.violations = list(violations or [])

    @property
    def ok(self):
        return not self.violations

    def __str__(self):
        vals = [f"ok = {self.ok}"] + [
            f"{kind}^{vec} = {value:.3g} at t={t:.6g}, h={h:.6g}"
            for kind, vec, t, h, value in self.violations
        ]
        return "<NonnegativityReport: " + ", ".join(vals) + ">"


def sample_nonnegativity(spec, sample=None):
    """Check a^l >= 0 and p^g >= 0 on the sample. Never raises."""
    if sample is None:
        sample = default_sample(spec.d)
    violations = []
    for t, h in sample:
        for kind, provider, vectors in (
            ("a", spec.a_coeff, spec.lambda0),
            ("p", spec.p_coeff, spec.lambda1),
        ):
            for vec in vectors:
                low = float(provider(t, sample.points, h, vec).min(initial=np.inf))
                if low < -TOLERANCE:
                    violations.append((kind, vec, t, h, low))
    return NonnegativityReport(violations)


def stencil_to_dict(spec):
    """The config form of a stencil built by one of the constructors."""
    if spec.recipe is None:
        raise StencilError(
            "This stencil was built from plain callables and cannot be serialized."
        )
    return dict(spec.recipe)


def _table_from_list(entries):
    table = {}
    for entry in entries or []:
        try:
            table[as_vector(entry["vector"])] = entry["field"]
        except (KeyError, TypeError) as e:
            raise ConfigError(
                f"Stencil table entries need 'vector' and 'field' keys, got {entry!r}."
            ) from e
    return table


def stencil_from_dict(data):
    """
    Rebuild a stencil from its config form.

    The "constructor" key selects build_diagonal_stencil
    ("diagonal"), build_diagdom_stencil ("diagdom"),
    build_explicit_stencil ("explicit"), or a weight-transformed
    stencil ("weighted").
    """
    data = dict(data)
    constructor = data.pop("constructor", None)
    R = int(data.pop("R", 0) or 0)
    nu = data.pop("nu", None)
    d = data.pop("d", None)
    if constructor == "diagonal":
        return build_diagonal_stencil(
            data["a_diag"], data.get("b", 0.0), data.get("c", 0.0),
            data.get("theta", 0.0), nu=nu, R=R, d=d,
        )
    if constructor == "diagdom":
        return build_diagdom_stencil(
            data["a"], data.get("b", 0.0), data.get("c", 0.0),
            data.get("kappa", 0.0), theta=data.get("theta"),
            theta_cross=data.get("theta_cross"), nu=nu, R=R, d=d,
        )
    if constructor == "explicit":
        return build_explicit_stencil(
            data["lambda0"], data["lambda1"],
            _table_from_list(data.get("a")), _table_from_list(data.get("p")),
            _table_from_list(data.get("c")), nu=nu, R=R, d=d,
        )
    if constructor == "weighted":
        from spde_richardson.weights import WeightSpec, transform_stencil

        base = stencil_from_dict(data["base"])
        weight = WeightSpec(s_bar=data["s_bar"], epsilon=data["epsilon"])
        return transform_stencil(base, weight, data["h"], period=data.get("period"))
    raise ConfigError(f"Unknown stencil constructor '{constructor}'.")
