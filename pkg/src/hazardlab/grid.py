"""Time discretisation shared by every simulation."""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing grid starting at 0.

    times has K+1 entries; dt and sqrt_dt have K.  Steps need not be equal,
    although the bundled scenarios all use uniform grids.
    """

    times: np.ndarray
    dt: np.ndarray = field(init=False, repr=False)
    sqrt_dt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.shape[0] < 2:
            raise ValueError("grid needs at least two time points")
        if times[0] != 0.0:
            raise ValueError("grid must start at 0")
        dt = np.diff(times)
        if not np.all(dt > 0.0):
            raise ValueError("grid times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "dt", dt)
        object.__setattr__(self, "sqrt_dt", np.sqrt(dt))

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def n_steps(self):
        return int(self.times.shape[0] - 1)

    def index_at(self, t):
        """Largest grid index whose time is <= t (t within the horizon)."""
        t = float(t)
        if t < 0.0 or t > self.horizon * (1.0 + 1e-12):
            raise ValueError(f"time {t} outside grid [0, {self.horizon}]")
        return int(np.searchsorted(self.times, t, side="right") - 1)

    def locate(self, t):
        """Interval index and fractional position of t inside its step."""
        idx = min(self.index_at(t), self.n_steps - 1)
        frac = (float(t) - self.times[idx]) / self.dt[idx]
        return idx, float(min(max(frac, 0.0), 1.0))


def uniform_grid(horizon, n_steps):
    """Equally spaced grid on [0, horizon] with n_steps intervals."""
    horizon = float(horizon)
    n_steps = int(n_steps)
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if n_steps < 1:
        raise ValueError("need at least one step")
    return TimeGrid(np.linspace(0.0, horizon, n_steps + 1))
