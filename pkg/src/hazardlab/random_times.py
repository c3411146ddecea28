"""Samplers for the random-time models under study.

Four constructions, one per qualitative regime:

* `cox_time`: first crossing of a cumulative intensity by an independent
  exponential threshold.  The conditional survival probability is a smooth
  decreasing functional of the driving paths.
* `honest_from_exp_martingale`: the time at which exp(W_t - t/2) attains its
  global maximum.  The time is honest (known at infinity) but not a stopping
  time, and its conditional survival probability is ratio-of-max shaped.
* `last_zero_before`: the last zero of W before a cutoff; the classic
  arcsine-law time, again honest and not a stopping time.
* `poisson_first_jump`: the first jump of a Poisson process in its own
  filtration.  A genuine stopping time, kept around as the sharp negative
  control for hazard-versus-compensator comparisons.

Samplers are chunk-level and pure: the same (seed, path_offset) always
yields the same sample, whatever chunking the runner picks.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, paths, rng
from .grid import TimeGrid

CENSORED = math.inf


@dataclass(frozen=True)
class RandomTimeSample:
    """Sampled times for one chunk of paths.

    tau is CENSORED (inf) for paths whose time was not resolved inside the
    horizon; tau_idx/tau_frac locate min(tau, horizon) inside its straddling
    grid step so per-path values can be interpolated without a search.
    extra carries model-specific arrays keyed by name.
    """

    grid: TimeGrid
    kind: str
    tau: np.ndarray
    tau_idx: np.ndarray
    tau_frac: np.ndarray
    extra: dict

    @property
    def n_paths(self):
        return int(self.tau.shape[0])

    @property
    def censored(self):
        return ~np.isfinite(self.tau)

    @property
    def censor_fraction(self):
        return float(self.censored.mean())


def _locate(grid, tau):
    """Vectorised interval index and fraction for finite times in [0, H]."""
    k = grid.n_steps
    capped = np.minimum(np.where(np.isfinite(tau), tau, grid.horizon), grid.horizon)
    idx = np.searchsorted(grid.times, capped, side="right") - 1
    idx = np.clip(idx, 0, k - 1).astype(np.int64)
    frac = (capped - grid.times[idx]) / grid.dt[idx]
    return idx, np.clip(frac, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Intensities and the first-crossing construction
# ---------------------------------------------------------------------------

class ConstantIntensity:
    """Deterministic constant rate."""

    def __init__(self, rate):
        rate = float(rate)
        if rate <= 0.0:
            raise ValueError("rate must be positive")
        self.rate = rate

    def cumulative(self, ensemble):
        return (self.rate * ensemble.grid.times)[None, :]


class StateIntensity:
    """Rate fn(times, W) evaluated pathwise, integrated left-rectangle.

    fn must return nonnegative rates of shape (n_paths, K+1); only the left
    endpoints enter the integral, keeping the cumulative process predictable
    on the grid.
    """

    def __init__(self, fn):
        self.fn = fn

    def cumulative(self, ensemble):
        rates = np.asarray(self.fn(ensemble.grid.times, ensemble.w), dtype=np.float64)
        if rates.shape != ensemble.w.shape:
            raise ValueError("intensity must return one rate per path and grid time")
        if np.any(rates < 0.0):
            raise ValueError("intensity must be nonnegative")
        cum = np.empty_like(rates)
        cum[:, 0] = 0.0
        np.cumsum(rates[:, :-1] * ensemble.grid.dt[None, :], axis=1, out=cum[:, 1:])
        return cum


def cox_time(ensemble, intensity):
    """First crossing of the cumulative intensity by an exp(1) threshold.

    Crossing times are interpolated inside the straddling step, which is
    exact when the intensity is constant there.  Paths whose cumulative
    intensity never reaches the threshold within the horizon are censored.
    """
    grid = ensemble.grid
    cum = intensity.cumulative(ensemble)
    theta = rng.exponentials(ensemble.seed, rng.STREAM_THRESHOLD,
                             ensemble.path_offset, ensemble.n_paths)
    tau, idx = kernels.first_crossing(cum, theta, grid.times)
    censored = idx < 0
    tau = np.where(censored, CENSORED, tau)
    tau_idx, tau_frac = _locate(grid, tau)
    extra = {"cumulative": cum, "threshold": theta}
    return RandomTimeSample(grid=grid, kind="cox", tau=tau,
                            tau_idx=tau_idx, tau_frac=tau_frac, extra=extra)


# ---------------------------------------------------------------------------
# Honest time: global argmax of an exponential martingale
# ---------------------------------------------------------------------------

def honest_from_exp_martingale(ensemble, sup_mode="bridge", tail_eps=1e-3):
    """Time of the global maximum of N_t = exp(W_t - t/2).

    N drifts to zero, so the maximum is attained.  A path is considered
    resolved once N / sup N falls below tail_eps: from then on the current
    record survives to infinity with probability at least 1 - tail_eps.
    Unresolved paths are censored (make the horizon long enough that this
    is rare).

    sup_mode picks how the running supremum is formed:

    * "bridge": interval maxima are drawn from the exact bridge law, so the
      supremum and the record value match the continuous-time law; the
      argmax time is only located to its interval (midpoint reported).
    * "grid": supremum over grid points only.  Biased low as a law, but the
      record then sits at a grid time with N and sup agreeing there exactly,
      which is what the pathwise decomposition identities want.
    """
    if sup_mode not in ("bridge", "grid"):
        raise ValueError(f"unknown sup_mode {sup_mode!r}")
    grid = ensemble.grid
    x = ensemble.w - 0.5 * grid.times[None, :]
    n_mat = np.exp(x)

    if sup_mode == "bridge":
        sup_mat, rec_iv, rec_log = paths.bridge_running_sup(ensemble)
        tau = grid.times[rec_iv] + 0.5 * grid.dt[rec_iv]
        tau_idx = rec_iv.copy()
        tau_frac = np.full(ensemble.n_paths, 0.5)
        log_sup = np.log(sup_mat)
    else:
        x_sup, rec_idx = kernels.grid_records(x)
        sup_mat = np.exp(x_sup)
        rows = np.arange(ensemble.n_paths)
        rec_log = x[rows, rec_idx]
        rec_iv = rec_idx
        tau = grid.times[rec_idx]
        tau_idx = np.minimum(rec_idx, grid.n_steps - 1).astype(np.int64)
        tau_frac = (rec_idx == grid.n_steps).astype(np.float64)
        log_sup = x_sup

    stop_idx = kernels.tail_stop(x, log_sup, math.log(tail_eps))
    censored = stop_idx < 0
    tau = np.where(censored, CENSORED, tau)
    tau_idx = np.where(censored, grid.n_steps - 1, tau_idx).astype(np.int64)
    tau_frac = np.where(censored, 1.0, tau_frac)

    stop_at = np.where(censored, grid.n_steps, stop_idx).astype(np.int64)
    extra = {
        "exp_mart": n_mat,
        "sup": sup_mat,
        "ln_sup": rec_log,            # record height, the lnSigma estimate
        "record_interval": rec_iv.astype(np.int64),
        "tail_stop_time": grid.times[np.minimum(stop_at, grid.n_steps)],
        "mu_at_tau": 1.0 + rec_log,   # at the argmax Z=1 and A=lnSigma
        "sup_mode": sup_mode,
    }
    return RandomTimeSample(grid=grid, kind="honest_expmart", tau=tau,
                            tau_idx=tau_idx, tau_frac=tau_frac, extra=extra)


# ---------------------------------------------------------------------------
# Honest time: last zero before a cutoff
# ---------------------------------------------------------------------------

def last_zero_before(ensemble, cutoff=1.0, detection="bridge"):
    """Last zero of W in [0, cutoff].  Never censored (0 counts as a zero).

    detection="bridge" also catches zeros strictly inside a same-sign step
    using the exact crossing probability exp(-2ab/dt); "sign" keeps only
    endpoint sign changes and carries an O(sqrt(dt)) bias toward 0, left in
    as the comparison mode.
    """
    if detection not in ("bridge", "sign"):
        raise ValueError(f"unknown detection {detection!r}")
    grid = ensemble.grid
    upto = grid.index_at(cutoff)
    if not math.isclose(grid.times[upto], cutoff, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError("cutoff must be a grid time")
    u = rng.uniforms(ensemble.seed, rng.STREAM_ZERO, ensemble.path_offset,
                     ensemble.n_paths, grid.n_steps)
    g, lastk = kernels.last_zero(ensemble.w, u, grid.dt, upto,
                                 use_bridge=(detection == "bridge"))
    tau_idx, tau_frac = _locate(grid, g)
    extra = {
        "cutoff": float(cutoff),
        # W sits exactly at zero at its last zero; evaluators use this
        # instead of interpolating the skeleton
        "w_at_tau": np.zeros(ensemble.n_paths),
        "detection": detection,
    }
    return RandomTimeSample(grid=grid, kind="last_zero", tau=g,
                            tau_idx=tau_idx, tau_frac=tau_frac, extra=extra)


# ---------------------------------------------------------------------------
# Stopping-time control: first jump of a Poisson process
# ---------------------------------------------------------------------------

def poisson_first_jump(grid, rate, n_paths, seed, path_offset=0):
    """First jump time of a rate-`rate` Poisson process, own filtration.

    The time is exponential(rate); paths jumping after the horizon are
    censored but keep their exact jump time in extra["tau_exact"] so the
    compensator rate*(t ^ tau) can be evaluated without truncation error.
    """
    rate = float(rate)
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    e = rng.exponentials(seed, rng.STREAM_JUMP, path_offset, n_paths)
    tau_exact = e / rate
    tau = np.where(tau_exact <= grid.horizon, tau_exact, CENSORED)
    tau_idx, tau_frac = _locate(grid, tau)
    extra = {"rate": rate, "tau_exact": tau_exact}
    return RandomTimeSample(grid=grid, kind="poisson_jump", tau=tau,
                            tau_idx=tau_idx, tau_frac=tau_frac, extra=extra)
