"""
Command line entry point:

    spde-richardson validate CONFIG
    spde-richardson solve CONFIG [--seed S]
    spde-richardson study CONFIG [--seed S] [--jobs N]
    spde-richardson oracle-check CONFIG [--seed S]

CONFIG is a TOML run config with the sections [problem], [stencil],
[grid], [time], [noise], [study], [weights] and [output].

Exit codes: 0 ok, 1 validation failure, 2 usage or config error,
3 numerical failure.
"""
import argparse
import json
import logging
import os
import sys
import traceback

import numpy as np
import pandas as pd

import spde_richardson.settings as settings
from spde_richardson.configure_numerics import configure_numerics
from spde_richardson.exceptions import ConfigError, SpdeError, StencilError, StudyError
from spde_richardson.grid import sup_norm
from spde_richardson.harness import StudyConfig, run_study
from spde_richardson.integrator import cfl_margin, integrate
from spde_richardson.noise import save_path, sample_path
from spde_richardson.oracle import fine_reference
from spde_richardson.problem import problem_from_dict
from spde_richardson.stencil import (
    default_sample,
    reconstruct_pde,
    sample_nonnegativity,
    validate_stencil,
)
from spde_richardson.weights import (
    WeightSpec,
    choose_epsilon,
    unweight,
    weight_on_grid,
    weighted_problem,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s:%(lineno)d | %(message)s"
RECONSTRUCTION_TOL = 1e-8

SCHEMA = {
    "problem": {"preset", "name", "a", "b", "c", "f", "g", "nu", "psi", "oracle"},
    "stencil": {
        "constructor", "a_diag", "a", "b", "c", "theta", "kappa", "theta_cross",
        "lambda0", "lambda1", "p", "nu", "base", "s_bar", "epsilon", "h", "period",
    },
    "grid": {"d", "n", "L"},
    "time": {
        "T", "policy", "ratio", "steps", "method", "solver", "tol", "maxiter",
        "record", "fine_factor",
    },
    "noise": {"R", "seed", "replicates", "save_path"},
    "study": {
        "levels", "k", "ratios", "norms", "q", "reference", "snapshots", "tolerance",
    },
    "weights": {"s_bar", "kappa", "epsilon"},
    "output": {"directory"},
}


class RunConfig:
    """A parsed and checked run config."""

    def __init__(self, sections, path=None):
        unknown = set(sections) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"Unknown config sections: {sorted(unknown)}.")
        for name, section in sections.items():
            if not isinstance(section, dict):
                raise ConfigError(f"[{name}] must be a table.")
            bad = set(section) - SCHEMA[name]
            if bad:
                raise ConfigError(f"Unknown keys in [{name}]: {sorted(bad)}.")
        self.path = path
        self.sections = sections
        self.problem = problem_from_dict(sections)
        self.n = self.problem.n0
        self.noise = sections.get("noise", {})
        self.time = sections.get("time", {})
        self.study = sections.get("study", {})
        self.weights = sections.get("weights")
        self.seed = int(self.noise.get("seed", 0))
        self.replicates = int(self.noise.get("replicates", 1))
        if self.replicates < 1:
            raise ConfigError("[noise] replicates must be at least 1.")
        base = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
        directory = sections.get("output", {}).get("directory", "output")
        self.output = os.path.join(base, directory)
        self.tolerance = self.study.get("tolerance")

    @classmethod
    def load(cls, path):
        try:
            with open(path, "rb") as f:
                sections = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path} is not valid TOML: {e}") from e
        return cls(sections, path)

    def configure(self):
        configure_numerics(
            implicit_solver=self.time.get("solver"),
            implicit_tol=self.time.get("tol"),
            implicit_maxiter=self.time.get("maxiter"),
        )

    def record_times(self):
        return [float(t) for t in self.time.get("record", [self.problem.T])]

    def weighted(self, problem, grid):
        """The conjugated problem of [weights], with its certificate."""
        w = WeightSpec(
            s_bar=float(self.weights.get("s_bar", 2.0)),
            epsilon=float(self.weights.get("epsilon", 0.0)),
        )
        certificate = None
        if "kappa" in self.weights and "epsilon" not in self.weights:
            certificate = choose_epsilon(
                problem.stencil, w, float(self.weights["kappa"]), grid.h,
                period=problem.period, T=problem.T,
            )
            w = WeightSpec(w.s_bar, certificate.epsilon)
        return weighted_problem(problem, w, grid.h), w, certificate


def _write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=str)
    logger.info("Wrote %s", path)


def _write_frame(frame, path):
    frame.to_csv(path, index=False, float_format=settings.CSV_FLOAT_FORMAT)
    logger.info("Wrote %s", path)


def _reconstruction_violations(problem, sample):
    out = []
    c = problem.coefficients
    for t in sample.times:
        for x in sample.points:
            a, b, cc = reconstruct_pde(problem.stencil, t, x)
            point = x[None, :]
            worst = max(
                float(np.abs(a - c.a_at(t, point)[0]).max()),
                float(np.abs(b - c.b_at(t, point)[0]).max()),
                abs(cc - float(c.c_at(t, point)[0])),
            )
            if worst > RECONSTRUCTION_TOL:
                out.append(
                    f"reconstruction residual {worst:.3g} at t={t:.6g}, x={np.round(x, 6).tolist()}"
                )
                return out
    return out


def cmd_validate(config):
    """
    Structural rules, reconstruction round trip, nonnegativity and
    the CFL margin. Prints one line per violation.
    """
    problem = config.problem
    grid = problem.grid(config.n)
    sample = default_sample(problem.d, period=problem.period, h_max=grid.h, T=problem.T)
    report = validate_stencil(problem.stencil, sample)
    violations = list(report.violations)
    violations += _reconstruction_violations(problem, sample)
    violations += [
        f"negative {kind}^{vec} = {low:.3g} at t={t:.6g}, h={h:.6g}"
        for kind, vec, t, h, low in sample_nonnegativity(problem.stencil, sample).violations
    ]
    scheme = problem.scheme_for(grid)
    margin = cfl_margin(problem.stencil, grid, scheme.dt, problem.T)
    if scheme.cfl_check and margin > settings.CFL_LIMIT:
        violations.append(f"CFL margin {margin:.4g} exceeds {settings.CFL_LIMIT} at n={grid.n}")
    if config.weights is not None:
        try:
            weighted, w, _ = config.weighted(problem, grid)
        except StencilError as e:
            violations.append(f"weights: {e}")
        else:
            violations += [f"weighted: {v}" for v in validate_stencil(weighted.stencil, sample).violations]

    print(f"problem {problem.name}: {problem.stencil}")
    print(f"CFL margin at n={grid.n}: {margin:.6g}")
    for note in report.notes:
        print(f"note: {note}")
    for violation in violations:
        print(f"violation: {violation}")
    if violations:
        logger.error("Validation found %d violations", len(violations))
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _oracle_errors(problem, trajectory, path):
    points = trajectory.grid.points()
    return [
        float(np.abs(state.flat - problem.oracle.evaluate(t, points, path)).max())
        for t, state in zip(trajectory.times, trajectory.states)
    ]


def cmd_solve(config):
    """One integration per replicate, written as trajectory CSVs."""
    problem = config.problem
    grid = problem.grid(config.n)
    scheme = problem.scheme_for(grid)
    steps = scheme.steps(problem.T)
    os.makedirs(config.output, exist_ok=True)
    status = EXIT_OK
    for replicate in range(config.replicates):
        path = sample_path(config.seed, problem.T, steps, problem.R, replicate)
        manifest = {"problem": problem.name, "config": config.path}
        if config.weights is not None:
            weighted, w, certificate = config.weighted(problem, grid)
            trajectory = unweight(
                integrate(weighted.stencil, weighted, grid, path, scheme, config.record_times()),
                w,
            )
            manifest["weights"] = dict(w.to_dict(), min_weight=float(weight_on_grid(w, grid).values.min()))
            if certificate is not None:
                manifest["weights"]["tries"] = certificate.tries
        else:
            trajectory = integrate(problem.stencil, problem, grid, path, scheme, config.record_times())
        manifest.update(trajectory.manifest)

        if problem.oracle is not None and problem.oracle.is_exact:
            errors = _oracle_errors(problem, trajectory, path)
            manifest["oracle_sup_error"] = max(errors)
            if config.tolerance is not None and max(errors) > float(config.tolerance):
                logger.error(
                    "Replicate %d: sup error %.3g exceeds the tolerance %g",
                    replicate, max(errors), float(config.tolerance),
                )
                status = EXIT_NUMERICAL

        _write_frame(
            trajectory.to_frame(), os.path.join(config.output, f"trajectory_r{replicate}.csv")
        )
        _write_json(os.path.join(config.output, f"manifest_r{replicate}.json"), manifest)
        if config.noise.get("save_path"):
            save_path(path, os.path.join(config.output, f"path_r{replicate}.npz"))
    return status


def study_config(config, jobs=1):
    study = config.study
    return StudyConfig(
        problem=config.problem,
        levels=int(study.get("levels", 4)),
        n0=config.n,
        k=int(study.get("k", 0)),
        ratios=study.get("ratios"),
        replicates=config.replicates,
        seed=config.seed,
        norms=tuple(study.get("norms", ("sup", "l2"))),
        q=study.get("q"),
        reference=study.get("reference", "auto"),
        snapshots=int(study.get("snapshots", 1)),
        jobs=jobs,
    )


def cmd_study(config, jobs=1):
    """Run the configured study; writes the CSV tables and a summary."""
    study = study_config(config, jobs)
    try:
        report = run_study(study)
    except StudyError as e:
        if e.partial_report is not None:
            e.partial_report.write_csv(config.output)
        raise
    report.write_csv(config.output)
    summary = report.summary_text()
    with open(os.path.join(config.output, "summary.txt"), "w", encoding="utf-8") as f:
        f.write(summary + "\n")
    _write_json(
        os.path.join(config.output, "manifest.json"),
        {
            "problem": config.problem.name,
            "reference": study.reference,
            "seed": study.seed,
            "replicates": study.replicates,
            "levels": study.levels,
            "k": study.k,
            "ratios": list(study.ratios),
            "q": study.q,
            "runs": report.manifests,
        },
    )
    print(summary)
    return EXIT_OK


def cmd_oracle_check(config):
    """
    Compare one integration with the exact oracle (when there is
    one) and with a time-refined run on the same grid.
    """
    problem = config.problem
    grid = problem.grid(config.n)
    scheme = problem.scheme_for(grid)
    factor = int(config.time.get("fine_factor", 4))
    if factor < 1:
        raise ConfigError("[time] fine_factor must be at least 1.")
    steps = scheme.steps(problem.T)
    path = sample_path(config.seed, problem.T, steps * factor, problem.R)
    record = config.record_times()
    trajectory = integrate(problem.stencil, problem, grid, path, scheme, record)
    reference = fine_reference(problem, grid, path, scheme.dt / factor, scheme.dt, record)
    rows = []
    for t, state, fine in zip(trajectory.times, trajectory.states, reference.states):
        row = {"t": t, "time_error": sup_norm(state - fine)}
        if problem.oracle is not None and problem.oracle.is_exact:
            exact = problem.oracle.evaluate(t, grid.points(), path)
            row["oracle_error"] = float(np.abs(state.flat - exact).max())
        rows.append(row)

    frame = pd.DataFrame(rows)
    os.makedirs(config.output, exist_ok=True)
    _write_frame(frame, os.path.join(config.output, "oracle_check.csv"))
    print(frame.to_string(index=False))
    if config.tolerance is not None and "oracle_error" in frame:
        if frame["oracle_error"].max() > float(config.tolerance):
            logger.error("Oracle error exceeds the tolerance %g", float(config.tolerance))
            return EXIT_NUMERICAL
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spde-richardson",
        description="Finite-difference SPDE solver with Richardson extrapolation studies.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("validate", "check the stencil of a run config"),
        ("solve", "integrate and write trajectory CSVs"),
        ("study", "run a refinement or extrapolation study"),
        ("oracle-check", "compare with the exact and the time-refined reference"),
    ):
        command = commands.add_parser(name, help=text)
        command.add_argument("config", help="TOML run config")
        command.add_argument("--seed", type=int, default=None, help="overrides [noise] seed")
        if name == "study":
            command.add_argument("--jobs", type=int, default=1, help="worker threads")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT)

    if not os.path.isfile(args.config):
        logger.error("Config file %s not found.", args.config)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        config = RunConfig.load(args.config)
    except ConfigError as e:
        logger.error("Invalid config: %s", e)
        return EXIT_USAGE
    except StencilError as e:
        logger.error("Invalid stencil: %s", e)
        print(f"violation: {e}")
        return EXIT_INVALID
    if args.seed is not None:
        config.seed = args.seed

    try:
        config.configure()
        if args.command == "validate":
            return cmd_validate(config)
        if args.command == "solve":
            return cmd_solve(config)
        if args.command == "study":
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1.")
            return cmd_study(config, args.jobs)
        return cmd_oracle_check(config)
    except ConfigError as e:
        logger.error("Invalid config: %s", e)
        return EXIT_USAGE
    except SpdeError:
        logger.error(traceback.format_exc())
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
