"""Streaming scenario runner and CSV emission.

Paths are processed in fixed-size chunks regenerated from counter-mode
randomness, so memory stays bounded by the chunk while statistics are exact
functions of (seed, n_paths) alone: the same scenario produces the same CSV
bytes for any thread count of a given backend.
"""

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import hazard, kernels, paths, random_times
from .survival import (IncreasingPartEstimator, RegressionSpec,
                    closed_form_bundle, fit_survival, indicator_survival)
from .backend import active_backend, apply_thread_cap
from .reduction import CurveMean, MeanSE
from .stat_tests import (AvoidanceCheck, CompensatorCheck, Decision,
                         DRIVER_PHIS, JUMP_PHIS, OptionalStoppingBattery,
                         StoppingLikenessCheck, TestReport)

SCHEMA_LINE = "# schema=hazard-lab-csv/1"

RATIO_PROBES = (0.5, 1.0, 2.0)        # argmax-model regression probe times
RATIO_SPEC = RegressionSpec(states=("log_ratio",), degree=5, ridge=1e-8)
SURVIVOR_PROBE = 0.5                  # first-crossing intercept-only probe
CENTRAL_MASS = 0.95                   # feature range for regression error
IDENTITY_TOL = 1e-10
EXACTNESS_TOL = 1e-12
AGREEMENT_TOL = 1e-2
CURVE_TOL = 0.02
RATIO_FIT_TOL = 0.03
QUADRATURE_STEPS = 10.0               # mean-curve quadrature error, in steps


@dataclass
class PricingResult:
    maturity: float
    payment: float
    recovery: float
    indicator_mean: float
    indicator_se: float
    conditional_mean: float
    conditional_se: float
    gap_mean: float
    gap_se: float


@dataclass
class RunArtifact:
    scenario: object
    backend: str
    reports: list
    curves: dict
    pricing: PricingResult = None
    info: dict = field(default_factory=dict)
    samples: dict = None

    @property
    def passed(self):
        return all(r.passed for r in self.reports)


def _abs_report(name, stat, threshold, n, detail=""):
    dec = Decision.PASS if stat <= threshold else Decision.FAIL
    return TestReport(name=name, statistic=float(stat), se=0.0, n=n,
                      threshold=float(threshold), decision=dec, detail=detail)


def _mean_report(name, acc, expected, detail=""):
    band = 3.0 * acc.se + 1e-15
    err = abs(acc.mean - expected)
    dec = Decision.PASS if err <= band else Decision.FAIL
    note = f"expected {expected:g}; {detail}" if detail else f"expected {expected:g}"
    return TestReport(name=name, statistic=float(acc.mean), se=acc.se,
                      n=acc.n, threshold=band, decision=dec, detail=note)


def _simulate_chunk(scn, m, offset):
    if scn.kind == "poisson_jump":
        sample = random_times.poisson_first_jump(scn.grid, scn.params["rate"],
                                                 m, scn.seed, offset)
        return sample, closed_form_bundle(sample), None
    ens = paths.simulate_brownian(scn.grid, m, scn.seed, offset)
    if scn.kind == "cox":
        intensity = random_times.ConstantIntensity(scn.params["rate"])
        sample = random_times.cox_time(ens, intensity)
    elif scn.kind == "honest_expmart":
        sample = random_times.honest_from_exp_martingale(
            ens, sup_mode=scn.params["sup_mode"],
            tail_eps=scn.params["tail_eps"])
    else:
        sample = random_times.last_zero_before(
            ens, cutoff=scn.params["cutoff"],
            detection=scn.params["detection"])
    return sample, closed_form_bundle(sample, ens), ens


def run_scenario(scn, chunk_size=None, collect_samples=0):
    apply_thread_cap()
    grid = scn.grid
    k1 = grid.n_steps + 1
    chunk = int(chunk_size or scn.chunk_size)
    expected_reject = scn.tests["expected"] == "reject"
    has_parts = scn.kind != "last_zero"
    rate = scn.params.get("rate")

    z_mean = CurveMean(k1)
    alive_mean = CurveMean(k1)
    censored = 0
    ap_mean = CurveMean(k1) if has_parts else None
    ao_mean = CurveMean(k1) if has_parts else None
    lam_exact_mean = CurveMean(k1) if has_parts else None
    lam_quad_mean = CurveMean(k1) if has_parts else None
    gamma_masked = CurveMean(k1) if has_parts else None
    gap_masked = CurveMean(k1) if has_parts else None
    mask_mean = CurveMean(k1) if has_parts else None

    battery = OptionalStoppingBattery() if scn.tests["battery"] else None
    likeness = (StoppingLikenessCheck()
                if scn.tests["stopping_likeness"] and has_parts else None)
    comp = None
    if scn.tests["compensator"] and has_parts:
        phis = JUMP_PHIS if scn.kind == "poisson_jump" else DRIVER_PHIS
        comp = CompensatorCheck(grid, phis=phis)
    control = None
    if scn.tests["compensator_control"]:
        control = CompensatorCheck(grid, pairs=((0.25, 0.75),), phis=("const",))
    avoid = (AvoidanceCheck(grid, scn.tests["avoidance_deltas"])
             if scn.tests["avoidance"] else None)

    identity_sup = 0.0
    quad_skipped = 0
    agreement_sup = 0.0
    gamma_pre_sup = 0.0
    quad_vs_comp_sup = 0.0
    partial_gap_sup = 0.0
    record_height = MeanSE()
    record_above2 = MeanSE()
    zero_time = MeanSE()
    increasing_est = IncreasingPartEstimator(grid) if scn.kind == "cox" else None
    probe_alive = []            # intercept-only regression sample (cox)
    ratio_data = {t: ([], []) for t in RATIO_PROBES} if scn.kind == "honest_expmart" else {}

    price_ind = MeanSE() if scn.pricing else None
    price_cond = MeanSE() if scn.pricing else None
    price_gap = MeanSE() if scn.pricing else None

    sample_rows = []
    sample_cols = None

    offset = 0
    while offset < scn.n_paths:
        m = min(chunk, scn.n_paths - offset)
        sample, bundle, ens = _simulate_chunk(scn, m, offset)
        alive = indicator_survival(sample)
        z_mean.add(bundle.survival)
        alive_mean.add(alive)
        censored += int(sample.censored.sum())

        if has_parts:
            ap_mean.add(bundle.arrival_predictable)
            ao_mean.add(bundle.arrival_optional)
            lam_exact = hazard.integrated_hazard_exact(bundle)
            lam_quad, skipped = hazard.integrated_hazard_quadrature(bundle)
            lam_exact_mean.add(lam_exact)
            lam_quad_mean.add(lam_quad)
            quad_skipped += int(skipped.sum())
            gamma = hazard.log_hazard(bundle)
            mask = (bundle.survival > 1e-12).astype(np.float64)
            gamma_masked.add(np.where(mask > 0.0, gamma, 0.0) * mask)
            gap_masked.add(np.where(mask > 0.0, lam_exact - gamma, 0.0) * mask)
            mask_mean.add(mask)

        if battery is not None and ens is not None:
            battery.add(sample, ens)
        if likeness is not None:
            likeness.add(sample, bundle)

        if scn.kind == "cox":
            agreement_sup = max(agreement_sup,
                                float(np.abs(gamma - lam_quad).max()))
            increasing_est.add(alive)
            probe_idx = grid.index_at(SURVIVOR_PROBE)
            probe_alive.append(alive[:, probe_idx].copy())
            if comp is not None:
                at_tau = np.where(np.isfinite(sample.tau),
                                  sample.extra["threshold"], np.inf)
                comp.add(sample, gamma, at_tau, ens)
            if control is not None:
                zeros = np.zeros_like(bundle.survival)
                control.add(sample, zeros, np.zeros(m), ens)
            if avoid is not None:
                _driver_targets(avoid, sample, ens)
        elif scn.kind == "honest_expmart":
            log_n = ens.w - 0.5 * grid.times[None, :]
            gap_path = bundle.arrival_predictable + np.log(bundle.survival)
            identity_sup = max(identity_sup,
                               float(np.abs(gap_path - log_n).max()))
            record_height.add(sample.extra["ln_sup"])
            record_above2.add((sample.extra["ln_sup"] > math.log(2.0))
                              .astype(np.float64))
            if comp is not None:
                comp.add(sample, bundle.arrival_predictable,
                         sample.extra["ln_sup"], ens)
            rec_iv = sample.extra["record_interval"]
            for t in RATIO_PROBES:
                idx = grid.index_at(t)
                u_t = np.log(bundle.survival[:, idx])
                alive_t = (rec_iv >= idx).astype(np.float64)
                ratio_data[t][0].append(u_t)
                ratio_data[t][1].append(alive_t)
            if avoid is not None:
                _sup_targets(avoid, sample)
        elif scn.kind == "poisson_jump":
            chk = hazard.stopping_time_gap_check(sample, bundle)
            gamma_pre_sup = max(gamma_pre_sup, chk.log_hazard_pre_arrival_max)
            quad_vs_comp_sup = max(quad_vs_comp_sup,
                                   chk.quadrature_vs_compensator_max)
            partial_gap_sup = max(partial_gap_sup, chk.partial_gap_max_err)
            if comp is not None:
                comp.add(sample, bundle.arrival_predictable,
                         rate * sample.extra["tau_exact"])
            if avoid is not None:
                avoid.add("fixed_quarter", sample.tau, np.full(m, 0.25))
                avoid.add("fixed_half", sample.tau, np.full(m, 0.5))
                avoid.add("self_collision", sample.tau, sample.tau)
        else:
            zero_time.add(sample.tau)
            if avoid is not None:
                avoid.add("fixed_quarter", sample.tau, np.full(m, 0.25))
                avoid.add("fixed_half", sample.tau, np.full(m, 0.5))
                _driver_targets(avoid, sample, ens, fixed=False)

        if scn.pricing:
            idx_t = grid.index_at(scn.pricing["maturity"])
            pay, rec = scn.pricing["payment"], scn.pricing["recovery"]
            alive_t = alive[:, idx_t]
            pi = pay * alive_t + rec * (1.0 - alive_t)
            zc = bundle.survival[:, idx_t]
            pc = pay * zc + rec * (1.0 - zc)
            price_ind.add(pi)
            price_cond.add(pc)
            price_gap.add(pi - pc)

        if collect_samples and offset < collect_samples:
            take = min(m, collect_samples - offset)
            cols = {"path": np.arange(offset, offset + take),
                    "tau": sample.tau[:take]}
            for key in ("threshold", "ln_sup", "tail_stop_time", "tau_exact"):
                if key in sample.extra:
                    cols[key] = np.asarray(sample.extra[key])[:take]
            sample_cols = list(cols)
            sample_rows.append(cols)

        offset += m

    reports = []
    if battery is not None:
        reports.extend(battery.reports(expected_reject=expected_reject))
    if likeness is not None:
        reports.extend(likeness.reports(expected_reject=expected_reject))
    if comp is not None:
        reports.extend(comp.reports())
    if control is not None:
        s_eff, t_eff = control.pairs[0]
        cv = math.exp(-rate * s_eff) - math.exp(-rate * t_eff)
        reports.extend(control.reports(
            expect_fail=True, control_value=cv, prefix="compensator_control"))
    if avoid is not None:
        collide = ("self_collision",) if scn.kind == "poisson_jump" else ()
        reports.extend(avoid.reports(
            final_threshold=scn.tests["avoidance_final"],
            expect_collision=collide))

    n = scn.n_paths
    if scn.kind == "cox":
        closed = np.exp(-rate * grid.times)
        reports.append(_abs_report(
            "hazard_agreement.sup_abs_diff", agreement_sup, AGREEMENT_TOL, n,
            "sup over paths and times of |log hazard - quadrature hazard|"))
        reports.append(_abs_report(
            "regression.survivor_curve_sup_err",
            float(np.abs(alive_mean.mean - closed).max()), CURVE_TOL, n,
            "alive-fraction curve against the closed-form survival"))
        fit = fit_survival(np.concatenate(probe_alive), {}, RegressionSpec())
        probe_err = abs(float(fit.predict({})[0])
                        - math.exp(-rate * SURVIVOR_PROBE))
        reports.append(_abs_report(
            "regression.intercept_probe_err", probe_err, CURVE_TOL, n,
            f"intercept-only fit at t={SURVIVOR_PROBE:g}"))
        inc = increasing_est.finalize()
        inc_err = float(np.abs(inc.mean_curve - (1.0 - closed)).max())
        reports.append(_abs_report(
            "increasing_part.sup_err", inc_err, CURVE_TOL, n,
            f"clamp fraction {inc.clamp_fraction:.4f}"))
    elif scn.kind == "honest_expmart":
        reports.append(_abs_report(
            "decomposition.identity_sup", identity_sup, IDENTITY_TOL, n,
            "pathwise (hazard gap) vs log driver martingale"))
        quad_err = float(np.abs(lam_quad_mean.mean - ap_mean.mean).max())
        quad_tol = QUADRATURE_STEPS * float(grid.dt.max())
        reports.append(_abs_report(
            "decomposition.quadrature_mean_sup", quad_err, quad_tol, n,
            "mean quadrature hazard against mean exact hazard"))
        reports.append(_abs_report(
            "decomposition.quadrature_skipped", float(quad_skipped), 0.0, n,
            "steps dropped by the positivity floor"))
        reports.append(_mean_report("law.record_height_mean",
                                    record_height, 1.0))
        reports.append(_mean_report("law.record_above_two",
                                    record_above2, 0.5))
        ratio_err = 0.0
        for t in RATIO_PROBES:
            u = np.concatenate(ratio_data[t][0])
            al = np.concatenate(ratio_data[t][1])
            fit = fit_survival(al, {"log_ratio": u}, RATIO_SPEC)
            lo, hi = np.quantile(u, [0.5 * (1 - CENTRAL_MASS),
                                     1 - 0.5 * (1 - CENTRAL_MASS)])
            sel = (u >= lo) & (u <= hi)
            pred = fit.predict({"log_ratio": u[sel]})
            ratio_err = max(ratio_err,
                            float(np.abs(pred - np.exp(u[sel])).max()))
        reports.append(_abs_report(
            "regression.ratio_feature_sup_err", ratio_err, RATIO_FIT_TOL, n,
            f"degree-{RATIO_SPEC.degree} fit, central {CENTRAL_MASS:.0%} "
            f"of the feature at probes {RATIO_PROBES}"))
    elif scn.kind == "poisson_jump":
        reports.append(_abs_report(
            "counterexample.log_hazard_pre_arrival", gamma_pre_sup,
            EXACTNESS_TOL, n, "sup of |log hazard| strictly before the jump"))
        reports.append(_abs_report(
            "counterexample.quadrature_vs_compensator", quad_vs_comp_sup,
            EXACTNESS_TOL, n, "quadrature hazard against rate*(t ^ tau)"))
        reports.append(_abs_report(
            "counterexample.partial_gap", partial_gap_sup, EXACTNESS_TOL, n,
            "hazard gap at 0.9*tau against 0.9*rate*tau, per path"))
    else:
        reports.append(_mean_report("law.last_zero_mean", zero_time, 0.5))

    pricing = None
    if scn.pricing:
        gap_band = 3.0 * price_gap.se + 1e-15
        dec = Decision.PASS if abs(price_gap.mean) <= gap_band else Decision.FAIL
        reports.append(TestReport(
            name="pricing.tower_gap", statistic=price_gap.mean,
            se=price_gap.se, n=price_gap.n, threshold=gap_band, decision=dec,
            detail="indicator-payoff mean minus conditional-payoff mean"))
        if scn.kind != "poisson_jump":
            # for a stopping time in its own filtration the two estimators
            # coincide path by path, so no variance is there to save
            better = price_cond.se < price_ind.se
            reports.append(TestReport(
                name="pricing.conditioning_reduces_se",
                statistic=price_cond.se, se=0.0, n=price_cond.n,
                threshold=price_ind.se,
                decision=Decision.PASS if better else Decision.FAIL,
                detail="conditional-estimator SE against indicator SE"))
        pricing = PricingResult(
            maturity=scn.pricing["maturity"], payment=scn.pricing["payment"],
            recovery=scn.pricing["recovery"],
            indicator_mean=price_ind.mean, indicator_se=price_ind.se,
            conditional_mean=price_cond.mean, conditional_se=price_cond.se,
            gap_mean=price_gap.mean, gap_se=price_gap.se)

    curves = {"time": grid.times.copy(),
              "survival": z_mean.mean,
              "alive": alive_mean.mean}
    if has_parts:
        curves["arrival_predictable"] = ap_mean.mean
        curves["arrival_optional"] = ao_mean.mean
        curves["martingale_part"] = z_mean.mean + ap_mean.mean
        curves["unit_mean"] = z_mean.mean + ao_mean.mean
        curves["martingale_hazard"] = lam_exact_mean.mean
        curves["martingale_hazard_quadrature"] = lam_quad_mean.mean
        frac = mask_mean.mean
        with np.errstate(invalid="ignore", divide="ignore"):
            curves["log_hazard"] = np.where(frac > 0.0,
                                            gamma_masked.mean / frac, np.nan)
            curves["gap"] = np.where(frac > 0.0,
                                     gap_masked.mean / frac, np.nan)
        curves["alive_mask_fraction"] = frac

    samples = None
    if sample_rows:
        samples = {c: np.concatenate([r[c] for r in sample_rows])
                   for c in sample_cols}

    info = {"scenario": scn.name, "kind": scn.kind,
            "backend": active_backend(), "seed": scn.seed,
            "n_paths": scn.n_paths, "chunk_size": chunk,
            "censor_fraction": censored / scn.n_paths}
    return RunArtifact(scenario=scn, backend=active_backend(),
                       reports=reports, curves=curves, pricing=pricing,
                       info=info, samples=samples)


def _driver_targets(avoid, sample, ens, fixed=True):
    grid = sample.grid
    m = sample.n_paths
    if fixed:
        avoid.add("fixed_quarter", sample.tau, np.full(m, 0.25))
        avoid.add("fixed_half", sample.tau, np.full(m, 0.5))
    rmax = kernels.running_max(ens.w)
    for level, name in ((0.5, "driver_hit_half"), (1.0, "driver_hit_one")):
        t_hit, idx = kernels.first_crossing(rmax, np.full(m, level), grid.times)
        avoid.add(name, sample.tau, t_hit, valid=idx >= 0)


def _sup_targets(avoid, sample):
    grid = sample.grid
    m = sample.n_paths
    sup = sample.extra["sup"]
    for level, name in ((1.5, "sup_hit_three_halves"), (2.0, "sup_hit_two")):
        t_hit, idx = kernels.first_crossing(sup, np.full(m, level), grid.times)
        avoid.add(name, sample.tau, t_hit, valid=idx >= 0)


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return ""
        return repr(x)
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(SCHEMA_LINE + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_artifact(artifact, out_dir):
    """Write bundle.csv, hazard.csv, reports.csv (and optionally
    samples.csv) under out_dir; partial files are removed on failure."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        c = artifact.curves
        kind = artifact.scenario.kind
        has_parts = "arrival_predictable" in c
        p = os.path.join(out_dir, "bundle.csv")
        header = ["time", "survival", "martingale_part",
                  "arrival_predictable", "arrival_optional", "unit_mean",
                  "alive", "source"]
        rows = []
        for i, t in enumerate(c["time"]):
            if has_parts:
                rows.append([t, c["survival"][i], c["martingale_part"][i],
                             c["arrival_predictable"][i],
                             c["arrival_optional"][i], c["unit_mean"][i],
                             c["alive"][i], kind])
            else:
                rows.append([t, c["survival"][i], None, None, None, None,
                             c["alive"][i], kind])
        _write_csv(p, header, rows)
        written.append(p)

        if has_parts:
            p = os.path.join(out_dir, "hazard.csv")
            header = ["time", "log_hazard", "martingale_hazard",
                      "martingale_hazard_quadrature", "gap"]
            rows = [[c["time"][i], c["log_hazard"][i],
                     c["martingale_hazard"][i],
                     c["martingale_hazard_quadrature"][i], c["gap"][i]]
                    for i in range(len(c["time"]))]
            _write_csv(p, header, rows)
            written.append(p)

        p = os.path.join(out_dir, "reports.csv")
        header = ["test", "statistic", "se", "n", "threshold", "decision",
                  "detail"]
        rows = [[r.name, r.statistic, r.se, r.n, r.threshold,
                 str(r.decision), r.detail] for r in artifact.reports]
        _write_csv(p, header, rows)
        written.append(p)

        if artifact.samples is not None:
            p = os.path.join(out_dir, "samples.csv")
            cols = list(artifact.samples)
            length = len(artifact.samples[cols[0]])
            rows = [[artifact.samples[col][i] for col in cols]
                    for i in range(length)]
            _write_csv(p, cols, rows)
            written.append(p)

        p = os.path.join(out_dir, "run_info.txt")
        with open(p, "w") as fh:
            for key, val in artifact.info.items():
                fh.write(f"{key}={val}\n")
        written.append(p)
    except BaseException:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
    return written
