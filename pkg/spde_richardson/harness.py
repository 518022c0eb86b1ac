"""
Convergence and extrapolation studies.

A study solves one problem on nested grids n_l = n0 * 2^l
(l = 0..levels-1), one replicate per Brownian realization. Inside
a replicate every grid and the reference are driven by
coarsenings of one master path, so the execution order of the
levels does not change any result.

Errors are measured on the coarsest grid G_{n0}, as the maximum
over the recorded snapshots, and aggregated over replicates into
moment errors (mean |e|^q)^(1/q). Orders are least-squares slopes
of log(error) against log(h).
"""
from dataclasses import dataclass
from functools import partial
import logging
import math
from multiprocessing.pool import ThreadPool
import os
import warnings

import numpy as np
import pandas as pd
from scipy import stats

import spde_richardson.settings as settings
from spde_richardson.exceptions import (
    ConfigError,
    FloorError,
    OrderFitError,
    SpdeError,
    StudyError,
)
from spde_richardson.grid import lp_norm, restrict
from spde_richardson.integrator import SchemeConfig, integrate
from spde_richardson.noise import sample_path
from spde_richardson.problem import ProblemSpec, build_preset
from spde_richardson.richardson import extrapolate, vandermonde_weights
from spde_richardson.utils import logged_stage

logger = logging.getLogger(__name__)

BELOW_FLOOR = "below floor"
QUALITATIVE = "qualitative"


@dataclass(frozen=True)
class OrderFit:
    """
    Least-squares fit of log(error) = slope * log(h) + intercept.

    residual is the root mean square of the log residuals and
    stderr the standard error of the slope (0 for two points).
    """

    slope: float
    intercept: float
    residual: float
    stderr: float
    points: int

    @property
    def ci(self):
        half = settings.CONFIDENCE_Z * self.stderr
        return self.slope - half, self.slope + half


def fit_order(errors):
    """
    Fit the convergence order of errors [(h, err), ...].

    Raises
    ------
    OrderFitError
        Fewer than two points or non-finite values.
    FloorError
        Some error is zero or negative (exact agreement).
    """
    errors = list(errors)
    if len(errors) < 2:
        raise OrderFitError("At least two (h, error) points are needed to fit an order.")
    h, err = (np.asarray(v, dtype=float) for v in zip(*errors))
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(err))):
        raise OrderFitError("Non-finite mesh widths or errors.")
    if np.any(h <= 0):
        raise OrderFitError("Mesh widths must be positive.")
    if np.any(err <= 0):
        raise FloorError(f"Nonpositive errors: {BELOW_FLOOR}.")
    x, y = np.log(h), np.log(err)
    fit = stats.linregress(x, y)
    residuals = y - (fit.slope * x + fit.intercept)
    stderr = float(fit.stderr) if len(errors) > 2 else 0.0
    return OrderFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        residual=float(np.sqrt(np.mean(residuals**2))),
        stderr=stderr,
        points=len(errors),
    )


def _parse_norm(name):
    if name == "sup":
        return np.inf
    if name.startswith("l"):
        try:
            p = float(name[1:])
        except ValueError:
            p = None
        if p is not None and p >= 1:
            return p
    raise ConfigError(f"Unknown norm '{name}'. Use 'sup' or 'l<p>' with p >= 1, e.g. 'l2'.")


@dataclass
class StudyConfig:
    """
    The parameters of a refinement or extrapolation study.

    problem: ProblemSpec or preset name.
    levels: number of dyadic solution meshes n0 * 2^l.
    n0: coarsest grid (problem.n0 by default).
    k, ratios: extrapolation order and mesh divisors (2^i by default).
    replicates, seed: Brownian realizations; replicate r uses
        sample_path(seed, ..., replicate=r).
    norms: "sup" and/or "l<p>".
    q: moment exponent.
    reference: "oracle", "self" or "auto" (oracle when the problem
        has an exact one).
    snapshots: errors are maxima over the times T j / snapshots.
    method: overrides problem.method.
    jobs: worker threads over replicates.
    """

    problem: object
    levels: int = 4
    n0: int = None
    k: int = 0
    ratios: tuple = None
    replicates: int = 1
    seed: int = 0
    norms: tuple = ("sup", "l2")
    q: float = None
    reference: str = "auto"
    snapshots: int = 1
    method: str = None
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.problem, str):
            self.problem = build_preset(self.problem)
        if not isinstance(self.problem, ProblemSpec):
            raise ConfigError("StudyConfig.problem must be a ProblemSpec or a preset name.")
        self.n0 = int(self.n0 or self.problem.n0)
        self.method = self.method or self.problem.method
        self.q = settings.DEFAULT_Q if self.q is None else self.q
        self.norms = tuple(self.norms)
        if self.levels < 1:
            raise ConfigError("A study needs at least one level.")
        if self.replicates < 1:
            raise ConfigError("A study needs at least one replicate.")
        if self.k < 0:
            raise ConfigError("The extrapolation order k must be nonnegative.")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1.")
        if self.snapshots < 1:
            raise ConfigError("snapshots must be at least 1.")
        if not 1 <= self.q <= settings.MAX_Q:
            raise ConfigError(f"The moment exponent q must lie in [1, {settings.MAX_Q}].")
        for name in self.norms:
            _parse_norm(name)
        if self.reference not in ("auto", "oracle", "self"):
            raise ConfigError(f"Unknown reference '{self.reference}'.")
        if self.reference == "auto":
            oracle = self.problem.oracle
            self.reference = "oracle" if oracle is not None and oracle.is_exact else "self"
        if self.reference == "oracle" and (
            self.problem.oracle is None or not self.problem.oracle.is_exact
        ):
            raise ConfigError(f"Problem '{self.problem.name}' has no exact oracle.")
        self.ratios = tuple(self.ratios or (2**i for i in range(self.k + 1)))
        if len(self.ratios) != self.k + 1:
            raise ConfigError(f"k={self.k} needs {self.k + 1} mesh ratios.")
        if self.q > 2 and self.replicates < settings.HIGH_Q_MIN_REPLICATES:
            warnings.warn(
                f"Moment exponent q={self.q} with only {self.replicates} replicates; "
                f"the estimate has a large variance "
                f"(use at least {settings.HIGH_Q_MIN_REPLICATES}).",
                UserWarning,
            )
        for n in self.meshes(self.k > 0):
            steps = self.problem.steps_for(n)
            if steps % self.snapshots:
                raise ConfigError(
                    f"{self.snapshots} snapshots do not fit the {steps} steps at n={n}."
                )

    @property
    def name(self):
        return self.problem.name

    @property
    def raw_id(self):
        return f"{self.name}:raw"

    @property
    def accel_id(self):
        return f"{self.name}:k{self.k}"

    @property
    def v_levels(self):
        return self.levels - self.k

    def level_meshes(self):
        return [self.n0 * 2**level for level in range(self.levels)]

    def meshes(self, accelerated=True):
        """Every grid the study solves on, coarsest first."""
        out = set(self.level_meshes())
        if accelerated:
            for level in range(max(self.v_levels, 0)):
                out.update(self.n0 * 2**level * n for n in self.ratios)
        return sorted(out)

    def reference_mesh(self, accelerated=True):
        if self.reference != "self":
            return None
        return 2 * max(self.meshes(accelerated))

    def reference_steps(self, accelerated=True):
        return 2 * self.problem.steps_for(self.reference_mesh(accelerated))

    def master_steps(self, accelerated=True):
        """The step count of the master path: lcm of every time grid."""
        counts = [self.problem.steps_for(n) for n in self.meshes(accelerated)]
        if self.reference == "self":
            counts.append(self.reference_steps(accelerated))
        return math.lcm(*counts)

    def record_times(self):
        T = self.problem.T
        return [T * j / self.snapshots for j in range(1, self.snapshots + 1)]


def master_path(config, replicate, accelerated=True):
    problem = config.problem
    return sample_path(
        config.seed, problem.T, config.master_steps(accelerated), problem.R, replicate
    )


def _solve(config, n, path, steps=None):
    problem = config.problem
    grid = problem.grid(n)
    scheme = problem.scheme_for(grid, config.method)
    if steps is not None:
        scheme = SchemeConfig(scheme.method, problem.T / steps, scheme.cfl_check)
    return integrate(problem.stencil, problem, grid, path, scheme, config.record_times())


def solve_levels(config, replicate, meshes=None, path=None):
    """
    Integrate one replicate on the given grids (every study grid by
    default), in the given order.

    Returns
    -------
    dict n -> Trajectory
    """
    path = path if path is not None else master_path(config, replicate, config.k > 0)
    meshes = config.meshes(config.k > 0) if meshes is None else meshes
    out = {}
    for n in meshes:
        try:
            out[n] = _solve(config, n, path)
        except SpdeError as e:
            raise StudyError(f"Level n={n} of replicate {replicate} failed: {e}") from e
        logger.info("Replicate %d: finished n=%d", replicate, n)
    return out


def _reference(config, path, accelerated):
    """Reference snapshots on the coarsest grid, one array per record time."""
    problem = config.problem
    coarse = problem.grid(config.n0)
    if config.reference == "oracle":
        points = coarse.points()
        return [
            problem.oracle.evaluate(t, points, path).reshape(coarse.shape)
            for t in config.record_times()
        ]
    n_ref = config.reference_mesh(accelerated)
    try:
        trajectory = _solve(config, n_ref, path, config.reference_steps(accelerated))
    except SpdeError as e:
        raise StudyError(f"Self reference at n={n_ref} failed: {e}") from e
    return [restrict(state, n_ref // config.n0).values for state in trajectory.states]


def _error(config, states, reference, norm):
    p = _parse_norm(norm)
    return max(lp_norm(state - ref, p) for state, ref in zip(states, reference))


def _replicate(config, plan, replicate):
    """Per-replicate errors: {(study_id, level, norm): error} and manifests."""
    accelerated = plan is not None
    path = master_path(config, replicate, accelerated)
    trajectories = solve_levels(config, replicate, config.meshes(accelerated), path)
    reference = _reference(config, path, accelerated)
    errors = {}
    for level, n in enumerate(config.level_meshes()):
        states = [restrict(s, n // config.n0) for s in trajectories[n].states]
        for norm in config.norms:
            errors[(config.raw_id, level, norm)] = _error(config, states, reference, norm)
    if accelerated:
        for level in range(config.v_levels):
            n = config.n0 * 2**level
            states = []
            for s in range(len(config.record_times())):
                v = extrapolate(plan, [trajectories[n * r].states[s] for r in plan.ratios])
                states.append(restrict(v, 2**level))
            for norm in config.norms:
                errors[(config.accel_id, level, norm)] = _error(config, states, reference, norm)
    manifests = [
        dict(trajectories[n].manifest, study=config.name) for n in sorted(trajectories)
    ]
    return errors, manifests


class StudyReport:
    """
    Errors and fitted orders of one study.

    The attributes of StudyReport are:

    report.rows (list of dict):
        One row per (study_id, level, replicate, norm) with the
        columns study_id, level, h, replicate, norm, p, error.
    report.fits (dict):
        (study_id, norm) -> OrderFit or None, fitted on the moment
        errors over levels.
    report.pathwise (list of dict):
        Per-replicate slopes, labelled "qualitative".
    report.notes (list of str):
        Orders that could not be fitted and why.
    report.manifests (list of dict):
        Run metadata of every integration.
    """

    def __init__(self, config, accelerated, rows, manifests, complete=True):
        self.config = config
        self.accelerated = accelerated
        self.rows = rows
        self.manifests = manifests
        self.complete = complete
        self.notes = []
        self.fits = {}
        self.moments = self._moments()
        self.pathwise = []
        if rows:
            self._fit()

    @property
    def study_ids(self):
        ids = [self.config.raw_id]
        if self.accelerated:
            ids.append(self.config.accel_id)
        return ids

    def _moments(self):
        q = self.config.q
        table = {}
        for row in self.rows:
            key = (row["study_id"], row["level"], row["norm"])
            table.setdefault(key, []).append(row["error"])
        return {key: float(np.mean(np.asarray(v) ** q) ** (1.0 / q)) for key, v in table.items()}

    def _series(self, study_id, norm, source):
        return [
            (self.h(level), source[(study_id, level, norm)])
            for level in range(self.config.levels)
            if (study_id, level, norm) in source
        ]

    def h(self, level):
        return self.config.problem.period / (self.config.n0 * 2**level)

    def _fit_or_note(self, series, label):
        if len(series) < 2:
            self.notes.append(f"{label}: fewer than 2 levels, no order fitted")
            return None
        if len(series) == 2:
            self.notes.append(f"{label}: two-point order, no confidence interval")
        try:
            return fit_order(series)
        except FloorError:
            self.notes.append(f"{label}: {BELOW_FLOOR}")
            logger.warning("%s: errors %s", label, BELOW_FLOOR)
            return None

    def _fit(self):
        for study_id in self.study_ids:
            for norm in self.config.norms:
                series = self._series(study_id, norm, self.moments)
                self.fits[(study_id, norm)] = self._fit_or_note(series, f"{study_id} {norm}")
        # Pathwise slopes of the accelerated (or raw) errors.
        study_id = self.study_ids[-1]
        replicates = sorted({row["replicate"] for row in self.rows})
        for norm in self.config.norms:
            for replicate in replicates:
                errors = {
                    (row["study_id"], row["level"], row["norm"]): row["error"]
                    for row in self.rows
                    if row["replicate"] == replicate
                }
                series = self._series(study_id, norm, errors)
                try:
                    slope = fit_order(series).slope if len(series) >= 2 else None
                except FloorError:
                    slope = None
                self.pathwise.append(
                    {
                        "study_id": study_id,
                        "norm": norm,
                        "replicate": replicate,
                        "max_error": max((e for _, e in series), default=float("nan")),
                        "slope": slope,
                        "label": QUALITATIVE,
                    }
                )

    def order(self, study_id, norm="sup"):
        fit = self.fits.get((study_id, norm))
        return None if fit is None else fit.slope

    @property
    def raw_order(self):
        return self.order(self.config.raw_id, self.config.norms[0])

    @property
    def accel_order(self):
        if not self.accelerated:
            return None
        return self.order(self.config.accel_id, self.config.norms[0])

    def improvement_threshold(self, norm="sup"):
        """
        The largest level mesh h such that the accelerated moment
        error is below the raw one at h and at every finer level;
        None when it is not below at the finest level.
        """
        if not self.accelerated:
            return None
        threshold = None
        for level in reversed(range(self.config.v_levels)):
            raw = self.moments.get((self.config.raw_id, level, norm))
            accel = self.moments.get((self.config.accel_id, level, norm))
            if raw is None or accel is None or not accel < raw:
                break
            threshold = self.h(level)
        return threshold

    def level_frame(self):
        """Moment errors per level with log2(err_l / err_{l+1})."""
        rows = []
        for study_id in self.study_ids:
            for norm in self.config.norms:
                series = self._series(study_id, norm, self.moments)
                for i, (h, err) in enumerate(series):
                    ratio = None
                    if i + 1 < len(series) and err > 0 and series[i + 1][1] > 0:
                        ratio = math.log2(err / series[i + 1][1])
                    rows.append(
                        {
                            "study_id": study_id,
                            "norm": norm,
                            "level": i,
                            "h": h,
                            "error": err,
                            "log2_ratio": ratio,
                        }
                    )
        return pd.DataFrame(
            rows, columns=["study_id", "norm", "level", "h", "error", "log2_ratio"]
        )

    def summary_frame(self):
        rows = []
        study_id = self.study_ids[-1]
        for norm in self.config.norms:
            fit = self.fits.get((study_id, norm))
            low, high = fit.ci if fit is not None else (None, None)
            rows.append(
                {
                    "study_id": study_id,
                    "norm": norm,
                    "raw_order": self.order(self.config.raw_id, norm),
                    "accel_order": self.order(self.config.accel_id, norm)
                    if self.accelerated
                    else None,
                    "ci_low": low,
                    "ci_high": high,
                }
            )
        return pd.DataFrame(
            rows, columns=["study_id", "norm", "raw_order", "accel_order", "ci_low", "ci_high"]
        )

    def to_frames(self):
        return {
            "study": pd.DataFrame(
                self.rows, columns=["study_id", "level", "h", "replicate", "norm", "p", "error"]
            ),
            "levels": self.level_frame(),
            "summary": self.summary_frame(),
            "pathwise": pd.DataFrame(
                self.pathwise,
                columns=["study_id", "norm", "replicate", "max_error", "slope", "label"],
            ),
        }

    def write_csv(self, directory):
        """Write study.csv, levels.csv, summary.csv and pathwise.csv."""
        os.makedirs(directory, exist_ok=True)
        paths = []
        for name, frame in self.to_frames().items():
            path = os.path.join(directory, f"{name}.csv")
            frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
            paths.append(path)
            logger.info("Wrote %s", path)
        return paths

    def summary_text(self):
        lines = [
            f"study {self.study_ids[-1]} ({'complete' if self.complete else 'partial'})",
            f"reference: {self.config.reference}"
            + (" (orders against the finest solution)" if self.config.reference == "self" else ""),
            f"replicates: {self.config.replicates}, q = {self.config.q}",
            self.summary_frame().to_string(index=False),
        ]
        threshold = self.improvement_threshold(self.config.norms[0])
        if self.accelerated:
            lines.append(f"improvement threshold ({self.config.norms[0]}): {threshold}")
        lines += [f"note: {note}" for note in self.notes]
        return "\n".join(lines)

    def __str__(self):
        vals = [
            f"study = {self.study_ids[-1]}",
            f"raw_order = {self.raw_order}",
            f"accel_order = {self.accel_order}",
            f"complete = {self.complete}",
        ]
        return "<StudyReport: " + ", ".join(vals) + ">"


class MockWorkerPool:
    """Serial stand-in for a thread pool when one job is requested."""

    def __enter__(self):
        return self

    def __exit__(self, *excinfo):
        pass

    imap = map


def make_worker_pool(jobs):
    if jobs == 1:
        return MockWorkerPool()
    return ThreadPool(jobs)


def _rows(config, errors, replicate):
    rows = []
    for (study_id, level, norm), error in sorted(errors.items()):
        rows.append(
            {
                "study_id": study_id,
                "level": level,
                "h": config.problem.period / (config.n0 * 2**level),
                "replicate": replicate,
                "norm": norm,
                "p": _parse_norm(norm),
                "error": error,
            }
        )
    return rows


def _run(config, plan):
    accelerated = plan is not None
    rows, manifests = [], []
    replicate = 0
    with make_worker_pool(config.jobs) as pool:
        try:
            for replicate, (errors, runs) in enumerate(
                pool.imap(partial(_replicate, config, plan), range(config.replicates))
            ):
                rows += _rows(config, errors, replicate)
                manifests += runs
        except SpdeError as e:
            report = StudyReport(config, accelerated, rows, manifests, complete=False)
            raise StudyError(f"Study {config.name} failed: {e}", partial_report=report) from e
    return StudyReport(config, accelerated, rows, manifests)


@logged_stage("refinement study")
def run_refinement_study(config):
    """
    Solve on the dyadic levels and fit the raw convergence order.

    Returns
    -------
    StudyReport with study id "<problem>:raw".
    """
    return _run(config, None)


@logged_stage("extrapolation study")
def run_extrapolation_study(config):
    """
    Solve on every grid the extrapolation needs, assemble v^h per
    level and fit raw and accelerated orders. k = 0 is the
    refinement study.
    """
    if config.k == 0:
        return run_refinement_study(config)
    # v^h exists on levels - k meshes; the accelerated order needs two of them.
    if config.levels < config.k + 2:
        raise ConfigError(
            f"An extrapolation study with k={config.k} needs at least {config.k + 2} levels."
        )
    plan = vandermonde_weights(config.k, config.ratios)
    return _run(config, plan)


def run_study(config):
    """Dispatch on config.k."""
    if config.k > 0:
        return run_extrapolation_study(config)
    return run_refinement_study(config)
