"""
Reproducible Brownian driving paths shared across mesh widths.

A path stores the cumulative values W (shape (N+1, R), W_0 = 0)
on a uniform time grid. Increments are consecutive differences,
so coarsening is exact subsampling of W and compositions of
coarsenings are bit-identical.

Each (seed, replicate, process r) owns one Philox stream, and the
increment of step n is the n-th draw of that stream. The draw is
therefore a fixed function of (seed, n, r) for a given replicate
and step count.
"""
from dataclasses import dataclass
import logging

import numpy as np

from spde_richardson.exceptions import NoiseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BrownianPath:
    """
    R independent Wiener processes sampled on 0 = t_0 < ... < t_N = T.

    The attributes of BrownianPath are:

    path.t_grid (np.ndarray):
        The N+1 sample times.
    path.W (np.ndarray):
        (N+1, R) values of the processes at the sample times.
    path.seed (int):
        The seed the path was generated from.
    path.replicate (int):
        The replicate index the path was generated for.
    """

    t_grid: np.ndarray
    W: np.ndarray
    seed: int = 0
    replicate: int = 0

    def __post_init__(self):
        t_grid = np.array(self.t_grid, dtype=float)
        W = np.array(self.W, dtype=float)
        if t_grid.ndim != 1 or t_grid.size < 2:
            raise NoiseError("A path needs at least two sample times.")
        if np.any(np.diff(t_grid) <= 0):
            raise NoiseError("Sample times must be strictly increasing.")
        if W.ndim != 2 or W.shape[0] != t_grid.size:
            raise NoiseError(
                f"W must have shape (N+1, R) = ({t_grid.size}, R), got {W.shape}."
            )
        t_grid.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "t_grid", t_grid)
        object.__setattr__(self, "W", W)

    @property
    def N(self):
        return self.t_grid.size - 1

    @property
    def R(self):
        return self.W.shape[1]

    @property
    def T(self):
        return float(self.t_grid[-1])

    @property
    def dt(self):
        return self.T / self.N

    @property
    def increments(self):
        """(N, R) Gaussian increments dw^r_n."""
        return np.diff(self.W, axis=0)

    def index_of(self, t):
        """The index n with t_n = t, within rounding."""
        n = int(round(t / self.dt))
        if n < 0 or n > self.N or not np.isclose(self.t_grid[n], t, rtol=1e-9, atol=1e-12):
            raise NoiseError(f"t={t} is not a sample time of the path.")
        return n

    def value_at(self, t):
        """w_t as an R-vector; t must be a sample time."""
        return self.W[self.index_of(t)]

    def __eq__(self, other):
        if not isinstance(other, BrownianPath):
            return NotImplemented
        return (
            np.array_equal(self.t_grid, other.t_grid)
            and np.array_equal(self.W, other.W)
            and self.seed == other.seed
            and self.replicate == other.replicate
        )

    __hash__ = None

    def __str__(self):
        vals = [
            f"N = {self.N}",
            f"R = {self.R}",
            f"T = {self.T:.6g}",
            f"seed = {self.seed}",
            f"replicate = {self.replicate}",
        ]
        return "<BrownianPath: " + ", ".join(vals) + ">"


def _generator(seed, replicate, r):
    # Counter-based stream keyed by (seed, replicate, process index).
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence([int(seed), int(replicate), int(r)]))
    )


def sample_path(seed, T, N, R, replicate=0):
    """
    Sample R independent Wiener processes on the uniform grid
    t_n = n T / N.

    Parameters
    ----------
    seed: int
        The study seed.
    T: float
        The time horizon (> 0).
    N: int
        The number of steps (>= 1).
    R: int
        The number of processes (>= 0). R = 0 gives an empty path
        for deterministic problems.
    replicate: int
        The replicate index; distinct replicates give independent
        paths for the same seed.
    """
    if N < 1:
        raise NoiseError("A path needs at least one step.")
    if R < 0:
        raise NoiseError("The number of processes must be nonnegative.")
    if not T > 0:
        raise NoiseError("The time horizon must be positive.")
    t_grid = T * np.arange(N + 1) / N
    dt = T / N
    W = np.zeros((N + 1, R))
    for r in range(R):
        dw = np.sqrt(dt) * _generator(seed, replicate, r).standard_normal(N)
        W[1:, r] = np.cumsum(dw)
    logger.debug("Sampled path seed=%d replicate=%d N=%d R=%d", seed, replicate, N, R)
    return BrownianPath(t_grid=t_grid, W=W, seed=int(seed), replicate=int(replicate))


def coarsen_path(path, factor):
    """
    The same realization on a grid `factor` times coarser: the
    increments are block sums of `factor` consecutive increments.
    """
    factor = int(factor)
    if factor < 1:
        raise NoiseError("The coarsening factor must be a positive integer.")
    if path.N % factor:
        raise NoiseError(f"N={path.N} is not divisible by the coarsening factor {factor}.")
    if factor == 1:
        return path
    logger.debug("Coarsening path N=%d by %d", path.N, factor)
    return BrownianPath(
        t_grid=path.t_grid[::factor],
        W=path.W[::factor],
        seed=path.seed,
        replicate=path.replicate,
    )


def save_path(path, file):
    """Dump a path to an .npz file for exact replay."""
    np.savez(
        file,
        t_grid=path.t_grid,
        W=path.W,
        seed=np.int64(path.seed),
        replicate=np.int64(path.replicate),
    )


def load_path(file):
    with np.load(file) as data:
        return BrownianPath(
            t_grid=data["t_grid"],
            W=data["W"],
            seed=int(data["seed"]),
            replicate=int(data["replicate"]),
        )
