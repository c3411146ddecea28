"""Conditional survival probabilities and their decompositions.

The central object is the bundle of grid matrices around the conditional
survival probability Z_t = P(time > t | observations to t):

* survival          Z itself, a supermartingale in [0, 1]
* arrival_predictable  the predictable increasing part (Z + it is a martingale)
* arrival_optional     the optional increasing counterpart (expected arrival
                       mass; Z + it is a mean-one martingale)

Both increasing processes are dual projections of the same raw arrival
indicator; they coincide when the time avoids stopping times and split for
genuine stopping times, which is the whole point of the comparisons made in
hazard.py.  Closed forms exist for every bundled model except arrival parts
of the last-zero time, which stay None there.

Estimation lives here too: cross-sectional survival regression at probe
times, and a per-step regression estimator of the predictable increasing
part from raw arrival indicators.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .grid import TimeGrid

_ATOL = 1e-9


@dataclass(frozen=True)
class SupermartingaleBundle:
    grid: TimeGrid
    survival: np.ndarray
    arrival_predictable: np.ndarray = None
    arrival_optional: np.ndarray = None
    source: str = "unknown"

    def __post_init__(self):
        z = self.survival
        want = (z.shape[0], self.grid.times.shape[0])
        if z.ndim != 2 or z.shape != want:
            raise ValueError("survival must be (n_paths, n_times)")
        if z.min() < -_ATOL or z.max() > 1.0 + _ATOL:
            raise ValueError("survival values must lie in [0, 1]")
        for name in ("arrival_predictable", "arrival_optional"):
            part = getattr(self, name)
            if part is None:
                continue
            if part.shape != z.shape:
                raise ValueError(f"{name} shape mismatch")
            if np.abs(part[:, 0]).max() > _ATOL:
                raise ValueError(f"{name} must start at 0")
            if np.diff(part, axis=1).min() < -_ATOL:
                raise ValueError(f"{name} must be nondecreasing")

    @property
    def n_paths(self):
        return int(self.survival.shape[0])

    @property
    def has_decomposition(self):
        return self.arrival_predictable is not None

    @property
    def martingale_part(self):
        """Z plus its predictable increasing part."""
        if self.arrival_predictable is None:
            raise ValueError(f"no decomposition for source {self.source!r}")
        return self.survival + self.arrival_predictable

    @property
    def unit_mean_martingale(self):
        """Z plus the optional increasing part; identically 1 iff the time
        cannot be told apart from a stopping time by stopped martingales."""
        if self.arrival_optional is None:
            raise ValueError(f"no optional part for source {self.source!r}")
        return self.survival + self.arrival_optional


def indicator_survival(sample):
    """Raw alive indicators 1{time > t} on the grid, one row per path."""
    return (sample.grid.times[None, :] < sample.tau[:, None]).astype(np.float64)


def closed_form_bundle(sample, ensemble=None):
    """Model-exact bundle for a sample produced by random_times."""
    grid = sample.grid
    n = sample.n_paths
    if sample.kind == "cox":
        cum = sample.extra["cumulative"]
        z = np.exp(-cum)
        if z.shape[0] == 1:
            z = np.ascontiguousarray(np.broadcast_to(z, (n, z.shape[1])))
        ap = 1.0 - z
        return SupermartingaleBundle(grid=grid, survival=z,
                                     arrival_predictable=ap,
                                     arrival_optional=ap, source=sample.kind)
    if sample.kind == "honest_expmart":
        n_mat = sample.extra["exp_mart"]
        sup = sample.extra["sup"]
        z = n_mat / sup
        ap = np.log(sup)
        return SupermartingaleBundle(grid=grid, survival=z,
                                     arrival_predictable=ap,
                                     arrival_optional=ap, source=sample.kind)
    if sample.kind == "last_zero":
        if ensemble is None:
            raise ValueError("last_zero bundle needs the driving ensemble")
        cutoff = sample.extra["cutoff"]
        t = grid.times[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(ensemble.w) / np.sqrt(np.maximum(cutoff - t, 0.0))
            z = special.erfc(ratio / math.sqrt(2.0))
        z = np.where(t >= cutoff, 0.0, z)
        z[:, 0] = 1.0
        return SupermartingaleBundle(grid=grid, survival=z, source=sample.kind)
    if sample.kind == "poisson_jump":
        tau = sample.extra["tau_exact"][:, None]
        rate = sample.extra["rate"]
        t = grid.times[None, :]
        z = (t < tau).astype(np.float64)
        ap = rate * np.minimum(t, tau)
        ao = 1.0 - z
        return SupermartingaleBundle(grid=grid, survival=z,
                                     arrival_predictable=ap,
                                     arrival_optional=ao, source=sample.kind)
    raise ValueError(f"no closed form for sample kind {sample.kind!r}")


def floor_violations(bundle, tau_idx, floor=1e-12):
    """Fraction of paths whose survival touches the floor before their time.

    Quadratures dividing by Z are only trustworthy when this is zero up to
    the evaluation horizon of interest.
    """
    zmin = np.minimum.accumulate(bundle.survival, axis=1)
    rows = np.arange(bundle.n_paths)
    at_tau = zmin[rows, np.clip(tau_idx, 0, zmin.shape[1] - 1)]
    return float((at_tau <= floor).mean())


# ---------------------------------------------------------------------------
# Cross-sectional survival regression
# ---------------------------------------------------------------------------

_BASES = ("polynomial", "bins")


@dataclass(frozen=True)
class RegressionSpec:
    """How to regress alive indicators on state variables at a fixed time.

    states names the feature columns handed to fit_survival; degree bounds
    the total degree of the polynomial basis (0 = intercept only).  The
    bins basis is piecewise-constant over equal-width bins of a single
    feature.  Ridge is applied to scaled non-intercept columns and escalates
    by 100x (at most three times) if the normal equations are near-singular.
    """

    states: tuple = ()
    degree: int = 0
    basis: str = "polynomial"
    n_bins: int = 64
    ridge: float = 1e-8

    def __post_init__(self):
        if self.basis not in _BASES:
            raise ValueError(f"basis must be one of {_BASES}")
        if not 0 <= self.degree <= 5:
            raise ValueError("degree must be between 0 and 5")
        if self.basis == "bins":
            if len(self.states) != 1:
                raise ValueError("bins basis takes exactly one state")
            if not 2 <= self.n_bins <= 256:
                raise ValueError("n_bins must be between 2 and 256")
        if self.ridge < 0.0:
            raise ValueError("ridge must be nonnegative")
        object.__setattr__(self, "states", tuple(self.states))


def _monomials(n_states, degree):
    out = [()]
    for d in range(1, degree + 1):
        out.extend(itertools.combinations_with_replacement(range(n_states), d))
    return out


def _poly_design(spec, feats):
    cols = [np.asarray(feats[name], dtype=np.float64) for name in spec.states]
    n = cols[0].shape[0] if cols else None
    if n is None:
        raise ValueError("polynomial basis with no states: pass states=() "
                         "only together with feats={} via fit_survival")
    terms = _monomials(len(cols), spec.degree)
    x = np.empty((n, len(terms)), dtype=np.float64)
    x[:, 0] = 1.0
    for j, term in enumerate(terms[1:], start=1):
        col = np.ones(n, dtype=np.float64)
        for s in term:
            col = col * cols[s]
        x[:, j] = col
    return x


class SurvivalFit:
    """Fitted cross-sectional survival model; callable on new features."""

    def __init__(self, spec, beta=None, scale=None, edges=None,
                 bin_values=None, condition=None, ridge_used=None):
        self.spec = spec
        self.beta = beta
        self.scale = scale
        self.edges = edges
        self.bin_values = bin_values
        self.condition = condition
        self.ridge_used = ridge_used

    def predict(self, feats=None):
        if self.spec.basis == "bins":
            v = np.asarray(feats[self.spec.states[0]], dtype=np.float64)
            idx = np.clip(np.digitize(v, self.edges) - 1, 0,
                          self.bin_values.shape[0] - 1)
            return np.clip(self.bin_values[idx], 0.0, 1.0)
        if not self.spec.states:
            if feats is None or not feats:
                return np.clip(np.array([self.beta[0]]), 0.0, 1.0)
            n = len(next(iter(feats.values())))
            return np.clip(np.full(n, self.beta[0]), 0.0, 1.0)
        x = _poly_design(self.spec, feats) * self.scale[None, :]
        return np.clip(x @ self.beta, 0.0, 1.0)


def fit_survival(alive, feats, spec):
    """Least-squares fit of alive indicators on basis functions of feats.

    Columns are scaled to unit max-abs before the ridge so the penalty is
    meaningful across features; the intercept is never penalised, which
    keeps the fitted mean equal to the sample mean.  Constant non-intercept
    columns are dropped.
    """
    alive = np.asarray(alive, dtype=np.float64)
    if spec.basis == "bins":
        v = np.asarray(feats[spec.states[0]], dtype=np.float64)
        lo, hi = float(v.min()), float(v.max())
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, spec.n_bins + 1)
        idx = np.clip(np.digitize(v, edges) - 1, 0, spec.n_bins - 1)
        sums = np.bincount(idx, weights=alive, minlength=spec.n_bins)
        counts = np.bincount(idx, minlength=spec.n_bins)
        overall = alive.mean()
        vals = np.where(counts > 0, sums / np.maximum(counts, 1), overall)
        return SurvivalFit(spec, edges=edges, bin_values=vals)

    if not spec.states:
        x = np.ones((alive.shape[0], 1), dtype=np.float64)
    else:
        x = _poly_design(spec, feats)
    scale = np.ones(x.shape[1], dtype=np.float64)
    maxabs = np.abs(x).max(axis=0)
    keep = maxabs > 0.0
    keep[0] = True
    scale[1:] = np.where(maxabs[1:] > 0.0, 1.0 / np.maximum(maxabs[1:], 1e-300), 0.0)
    xs = x * scale[None, :]
    xs = xs[:, keep]
    xtx = xs.T @ xs
    xty = xs.T @ alive
    pen = np.ones(xtx.shape[0])
    pen[0] = 0.0
    ridge = spec.ridge
    beta_k = None
    cond = np.inf
    for _ in range(4):
        m = xtx + (ridge * alive.shape[0]) * np.diag(pen)
        cond = float(np.linalg.cond(m))
        if cond < 1e12:
            beta_k = np.linalg.solve(m, xty)
            break
        ridge *= 100.0
    if beta_k is None:
        beta_k = np.linalg.solve(xtx + (ridge * alive.shape[0]) * np.diag(pen), xty)
    beta = np.zeros(x.shape[1], dtype=np.float64)
    beta[keep] = beta_k
    return SurvivalFit(spec, beta=beta, scale=scale, condition=cond,
                       ridge_used=ridge)


# ---------------------------------------------------------------------------
# Predictable increasing part from raw arrival indicators
# ---------------------------------------------------------------------------

class IncreasingPartEstimator:
    """Per-step cross-sectional regression of arrival mass on left states.

    Feed chunks of alive-indicator matrices (and optional per-step feature
    matrices); finalize returns the ensemble-mean estimated increasing part.
    With intercept-only conditioning the telescoping is exact: the mean
    curve equals 1 minus the mean alive fraction at each grid time.
    """

    def __init__(self, grid, n_features=0):
        self.grid = grid
        self.p = int(n_features) + 1
        k = grid.n_steps
        self._xtx = np.zeros((k, self.p, self.p))
        self._xty = np.zeros((k, self.p))
        self._xsum = np.zeros((k, self.p))
        self.n = 0

    def add(self, alive, feats=None):
        alive = np.asarray(alive, dtype=np.float64)
        n, kp1 = alive.shape
        k = kp1 - 1
        dy = alive[:, :-1] - alive[:, 1:]  # arrival mass in each step, >= 0
        x = np.ones((n, k, self.p))
        if self.p > 1:
            if feats is None or len(feats) != self.p - 1:
                raise ValueError("feature count does not match n_features")
            for j, f in enumerate(feats):
                x[:, :, j + 1] = f[:, :-1]
        self._xtx += np.einsum("nkp,nkq->kpq", x, x)
        self._xty += np.einsum("nkp,nk->kp", x, dy)
        self._xsum += x.sum(axis=0)
        self.n += n

    def finalize(self, ridge=1e-10):
        """Mean estimated increasing curve, raw and clamped-nondecreasing."""
        if self.n == 0:
            raise ValueError("no chunks added")
        k = self.grid.n_steps
        raw_inc = np.empty(k)
        pen = np.eye(self.p)
        pen[0, 0] = 0.0
        for j in range(k):
            m = self._xtx[j] + ridge * self.n * pen
            beta = np.linalg.solve(m, self._xty[j])
            raw_inc[j] = (self._xsum[j] @ beta) / self.n
        clamped = np.maximum(raw_inc, 0.0)
        curve = np.concatenate([[0.0], np.cumsum(clamped)])
        clamp_fraction = float((raw_inc < 0.0).mean())
        return IncreasingPartResult(self.grid, curve, raw_inc, clamp_fraction)


@dataclass(frozen=True)
class IncreasingPartResult:
    grid: TimeGrid
    mean_curve: np.ndarray
    raw_increments: np.ndarray
    clamp_fraction: float
