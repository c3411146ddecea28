"""Two hazard notions and the checks that tell them apart.

For a bundle around the conditional survival Z two cumulative hazards make
sense:

* the log hazard Gamma_t = -ln Z_t, defined wherever Z > 0;
* the martingale hazard Lambda_t = integral of dA / Z_- against the
  predictable increasing part A, the enlarged-filtration compensator of the
  arrival indicator up to the sampled time.

For smooth first-crossing models the two coincide.  For honest times they
differ by exactly the log of the underlying positive martingale.  For a
genuine stopping time (Poisson first jump) the log hazard vanishes before
arrival while the martingale hazard grows linearly, which kills the hope
that the two might always agree.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


def log_hazard(bundle):
    """Gamma = -ln Z, +inf where Z has hit zero."""
    z = bundle.survival
    out = np.full_like(z, np.inf)
    pos = z > 0.0
    np.negative(np.log(z, where=pos, out=np.zeros_like(z)), out=out, where=pos)
    return out


def integrated_hazard_quadrature(bundle, floor=1e-12):
    """Left-endpoint quadrature of dA / Z along each path.

    Returns (values, skipped) where skipped counts per-path steps whose
    contribution was dropped because Z sat at or below the floor.
    """
    if not bundle.has_decomposition:
        raise ValueError(f"source {bundle.source!r} has no increasing part "
                         "to integrate against")
    return kernels.hazard_quadrature(bundle.arrival_predictable,
                                     bundle.survival, floor)


def integrated_hazard_exact(bundle):
    """Closed-form martingale hazard for sources that admit one.

    First-crossing models: the integral collapses to -ln Z.  Argmax and
    stopping-time models: the increasing part is already the compensator.
    """
    if bundle.source == "cox":
        return -np.log(bundle.survival)
    if bundle.source in ("honest_expmart", "poisson_jump"):
        return bundle.arrival_predictable
    raise ValueError(f"no exact martingale hazard for source {bundle.source!r}")


def hazard_gap(bundle):
    """Lambda - Gamma with the exact martingale hazard; finite pre-arrival."""
    return integrated_hazard_exact(bundle) - log_hazard(bundle)


# ---------------------------------------------------------------------------
# Per-chunk check summaries (the runner folds these with max / CurveMean)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HonestChunkCheck:
    identity_max_err: float      # (Lambda - Gamma) vs ln N, pathwise
    quadrature_matrix: np.ndarray
    exact_matrix: np.ndarray
    skipped_steps: int


def honest_decomposition_check(sample, ensemble, bundle, floor=1e-12):
    """Pathwise identity and quadrature material for the argmax model.

    The identity says the hazard gap equals the log of the driving
    exponential martingale at every grid time; it must hold to rounding.
    The quadrature matrices are returned so the caller can compare the
    ensemble means (per-path quadrature error does not average away at
    fixed step size, the mean curves are the meaningful comparison).
    """
    if sample.kind != "honest_expmart":
        raise ValueError("decomposition check is for the argmax model")
    log_n = ensemble.w - 0.5 * ensemble.grid.times[None, :]
    gap = bundle.arrival_predictable + np.log(bundle.survival)
    identity_err = float(np.abs(gap - log_n).max())
    lam_num, skipped = integrated_hazard_quadrature(bundle, floor)
    return HonestChunkCheck(identity_max_err=identity_err,
                            quadrature_matrix=lam_num,
                            exact_matrix=bundle.arrival_predictable,
                            skipped_steps=int(skipped.sum()))


@dataclass(frozen=True)
class StoppingChunkCheck:
    log_hazard_pre_arrival_max: float
    quadrature_vs_compensator_max: float
    partial_gap_max_err: float
    n_evaluated: int


def stopping_time_gap_check(sample, bundle, back_fraction=0.9):
    """The counterexample, path by path.

    Before the jump Z is identically 1, so the log hazard is exactly zero;
    the martingale hazard is rate*(t ^ tau) and the quadrature reproduces it
    to rounding.  At back_fraction * tau the gap between the two hazards is
    therefore back_fraction * rate * tau, checked here per path using the
    quadrature values at the last grid point before the evaluation time plus
    the known pre-arrival slope (plain interpolation would smear the kink in
    the step containing tau itself).
    """
    if sample.kind != "poisson_jump":
        raise ValueError("gap check is for the first-jump model")
    grid = sample.grid
    rate = sample.extra["rate"]
    tau_exact = sample.extra["tau_exact"]
    gamma = log_hazard(bundle)
    pre = grid.times[None, :] < tau_exact[:, None]
    gmax = float(np.abs(np.where(pre, gamma, 0.0)).max())

    lam_num, _ = integrated_hazard_quadrature(bundle)
    comp = bundle.arrival_predictable
    qmax = float(np.abs(lam_num - comp).max())

    keep = np.isfinite(sample.tau)
    n_eval = int(keep.sum())
    if n_eval:
        t_eval = back_fraction * tau_exact[keep]
        idx = np.clip(np.searchsorted(grid.times, t_eval, side="right") - 1,
                      0, grid.n_steps - 1)
        rows = np.flatnonzero(keep)
        lam_left = lam_num[rows, idx]
        lam_eval = lam_left + rate * (t_eval - grid.times[idx])
        gamma_eval = gamma[rows, idx]  # zero pre-arrival, checked above
        gap = lam_eval - gamma_eval
        pmax = float(np.abs(gap - back_fraction * rate * tau_exact[keep]).max())
    else:
        pmax = 0.0
    return StoppingChunkCheck(log_hazard_pre_arrival_max=gmax,
                              quadrature_vs_compensator_max=qmax,
                              partial_gap_max_err=pmax,
                              n_evaluated=n_eval)


def first_crossing_agreement(bundle, floor=1e-12):
    """Sup over paths and times of |Gamma - Lambda_quadrature| for smooth
    first-crossing bundles, where the two hazards agree in the limit."""
    if bundle.source != "cox":
        raise ValueError("agreement check is for first-crossing bundles")
    lam_num, skipped = integrated_hazard_quadrature(bundle, floor)
    gamma = -np.log(bundle.survival)
    return float(np.abs(gamma - lam_num).max()), int(skipped.sum())
