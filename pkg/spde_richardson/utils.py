import functools
import logging
import time

import numpy as np
import scipy
from packaging import version

logger = logging.getLogger(__name__)

## Library versions
numpy_version = version.parse(np.__version__)
scipy_version = version.parse(scipy.__version__)


def numpy_version_is_at_least(req_version="1.17"):
    """Check that the used version of numpy is greater or equal
    to some version `req_version`.

    This is a private method, and should not be exposed to users.
    """
    return numpy_version >= version.parse(req_version)


def scipy_version_is_at_least(req_version="1.12"):
    """Check that the used version of scipy is greater or equal
    to some version `req_version`.

    This is a private method, and should not be exposed to users.
    """
    return scipy_version >= version.parse(req_version)


def logged_stage(stage_name):
    """
    decorator to log the start, the end and the duration of
    a long-running stage (a study, an integration, a search).

    Parameters
    ----------
    stage_name: str
        The name shown in the log records.
    """

    def add_logging(function):
        @functools.wraps(function)
        def wrapper(*args, **kwargs):
            t0 = time.perf_counter()
            logger.info("Starting %s.", stage_name)
            try:
                out = function(*args, **kwargs)
            except Exception:
                logger.warning(
                    "Stage %s failed after %.3gs.", stage_name, time.perf_counter() - t0
                )
                raise
            logger.info(
                "Finished %s in %.3gs.", stage_name, time.perf_counter() - t0
            )
            return out

        return wrapper

    return add_logging


def as_points(x, d=None):
    """
    Normalize a point or a batch of points to an (N, d) float array.

    Parameters
    ----------
    x: array_like
        A single point of shape (d,) or a batch of shape (N, d).
        In one dimension a 1-d array is read as N points.
    d: int or None
        The expected dimension.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        if d == 1:
            x = x.reshape(-1, 1)
        else:
            x = x.reshape(1, -1)
    if d is not None and x.shape[1] != d:
        raise ValueError(f"Expected points of dimension {d}, got {x.shape[1]}.")
    return x
