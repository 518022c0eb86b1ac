class SpdeError(Exception):
    """Base class of all errors raised by spde_richardson."""


class ConfigError(SpdeError):
    """Invalid run configuration or invalid numerical settings."""


class StencilError(SpdeError):
    """A stencil constructor or transformation precondition is violated."""


class GridError(SpdeError):
    """Grid mismatch, stencil reach violation, or non-finite grid values."""


class NoiseError(SpdeError):
    """Invalid Brownian path request (shapes, coarsening factors, times)."""


class IntegrationError(SpdeError):
    """
    Failure while time-stepping.

    Attributes
    ----------
    step: int or None
        Index of the step that failed (0-based), if known.
    time: float or None
        The time at the start of the failing step, if known.
    """

    def __init__(self, message, step=None, time=None):
        self.step = step
        self.time = time
        if step is not None:
            message = f"{message} (step {step}, t={time:.6g})"
        super().__init__(message)


class CflError(IntegrationError):
    """The explicit time step violates the sufficient CFL condition."""


class InstabilityError(IntegrationError):
    """Non-finite values appeared in the solution."""


class SolverError(IntegrationError):
    """The implicit linear solver did not converge."""


class ExtrapolationError(SpdeError):
    """Singular Vandermonde system or incompatible solution grids."""


class OracleError(SpdeError):
    """Oracle parameters outside their validity conditions."""


class OrderFitError(SpdeError):
    """Convergence orders cannot be fitted from the given errors."""


class FloorError(OrderFitError):
    """Nonpositive errors: exact agreement, reported as below floor."""


class StudyError(SpdeError):
    """
    A level of a convergence study failed.

    Attributes
    ----------
    partial_report: StudyReport
        The report assembled from the replicates that finished.
    """

    def __init__(self, message, partial_report=None):
        super().__init__(message)
        self.partial_report = partial_report
