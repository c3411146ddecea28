"""Brownian path ensembles on a fixed grid.

Paths are generated from counter-mode randomness, so a chunk of paths is a
pure function of (seed, path_offset).  Regenerating paths [offset, offset+n)
in any chunking gives identical bytes, which is what makes the streaming
runner reproducible.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels, rng
from .grid import TimeGrid


@dataclass(frozen=True)
class PathEnsemble:
    """Brownian paths W (n_paths, K+1) plus their provenance."""

    grid: TimeGrid
    w: np.ndarray
    seed: int
    path_offset: int

    @property
    def n_paths(self):
        return int(self.w.shape[0])


def simulate_brownian(grid, n_paths, seed, path_offset=0):
    """Standard Brownian motion sampled at the grid times."""
    if not isinstance(grid, TimeGrid):
        raise TypeError("grid must be a TimeGrid")
    z = rng.standard_normals(seed, rng.STREAM_DRIVER, path_offset, n_paths, grid.n_steps)
    w = kernels.scaled_cumsum(z, grid.sqrt_dt)
    return PathEnsemble(grid=grid, w=w, seed=int(seed), path_offset=int(path_offset))


def exponential_martingale(ensemble, theta=1.0):
    """exp(theta W_t - theta^2 t / 2) for every path and grid time."""
    return kernels.exp_drift(ensemble.w, ensemble.grid.times, theta)


def running_sup(values):
    """Prefix maximum of grid values along each path."""
    return kernels.running_max(values)


def bridge_running_sup(ensemble, theta=1.0):
    """Exact running sup of exp(theta W - theta^2 t/2) between grid times.

    Returns (sup_values, record_interval, record_log_value).  The sup is
    exact in law, not just the max over grid points: conditioned on its
    endpoints, the interior max of the log process follows the reflection
    law of a Brownian bridge with variance theta^2 dt (the drift drops out
    under endpoint conditioning), sampled here with one uniform per step.
    """
    grid = ensemble.grid
    x = theta * ensemble.w - (0.5 * theta * theta) * grid.times[None, :]
    u = rng.uniforms(ensemble.seed, rng.STREAM_BRIDGE, ensemble.path_offset,
                     ensemble.n_paths, grid.n_steps)
    log_sup, rec_iv, rec_log = kernels.bridge_sup(x, u, grid.dt * (theta * theta))
    return np.exp(log_sup), rec_iv, rec_log
