import logging

import spde_richardson.settings as settings
from spde_richardson.exceptions import ConfigError

logger = logging.getLogger(__name__)

SOLVERS = ("direct", "gmres")


def configure_numerics(
    implicit_solver=None,
    implicit_tol=None,
    implicit_maxiter=None,
    cfl_limit=None,
    sample_size=None,
    sample_seed=None,
    max_q=None,
    csv_float_format=None,
):
    """
    Configure the numerical defaults of spde_richardson.
    Values left as None are not changed.

    Parameters
    ---------
    implicit_solver: None or str
        The linear solver of the drift-implicit Euler stepper.
        "direct" uses a sparse LU factorization; "gmres" uses
        restarted GMRES with tolerance `implicit_tol`.
    implicit_tol: None or float
        Relative residual tolerance of the iterative solver.
    implicit_maxiter: None or int
        Maximum number of iterations of the iterative solver.
        Non-convergence raises SolverError.
    cfl_limit: None or float
        Explicit stepping is refused when the sufficient CFL
        margin exceeds this value (default 1).
    sample_size: None or int
        Number of random points used when checking stencil
        coefficients pointwise.
    sample_seed: None or int
        Seed of that random sample.
    max_q: None or int
        The largest moment exponent accepted by the study harness.
    csv_float_format: None or str
        printf-style float format used in every CSV output.
    """
    if implicit_solver is not None:
        if implicit_solver not in SOLVERS:
            raise ConfigError(
                f"Unknown implicit solver '{implicit_solver}'. Use one of {SOLVERS}."
            )
        settings.IMPLICIT_SOLVER = implicit_solver
    if implicit_tol is not None:
        if not implicit_tol > 0:
            raise ConfigError("implicit_tol must be positive.")
        settings.IMPLICIT_TOL = float(implicit_tol)
    if implicit_maxiter is not None:
        if int(implicit_maxiter) < 1:
            raise ConfigError("implicit_maxiter must be at least 1.")
        settings.IMPLICIT_MAXITER = int(implicit_maxiter)
    if cfl_limit is not None:
        if not cfl_limit > 0:
            raise ConfigError("cfl_limit must be positive.")
        settings.CFL_LIMIT = float(cfl_limit)
    if sample_size is not None:
        if int(sample_size) < 1:
            raise ConfigError("sample_size must be at least 1.")
        settings.SAMPLE_SIZE = int(sample_size)
    if sample_seed is not None:
        settings.SAMPLE_SEED = int(sample_seed)
    if max_q is not None:
        if int(max_q) < 1:
            raise ConfigError("max_q must be at least 1.")
        settings.MAX_Q = int(max_q)
    if csv_float_format is not None:
        settings.CSV_FLOAT_FORMAT = csv_float_format

    logger.debug(
        "Numerics configured: solver=%s tol=%g maxiter=%d cfl_limit=%g",
        settings.IMPLICIT_SOLVER,
        settings.IMPLICIT_TOL,
        settings.IMPLICIT_MAXITER,
        settings.CFL_LIMIT,
    )
