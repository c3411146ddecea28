"""Bundle validation, closed forms, and the survival regressions."""

import numpy as np
import pytest

from hazardlab.survival import (IncreasingPartEstimator, RegressionSpec,
                             SupermartingaleBundle, closed_form_bundle,
                             fit_survival, floor_violations,
                             indicator_survival)
from hazardlab.grid import uniform_grid
from hazardlab.paths import simulate_brownian
from hazardlab.random_times import (ConstantIntensity, cox_time,
                                    honest_from_exp_martingale,
                                    last_zero_before, poisson_first_jump)


@pytest.fixture
def grid():
    return uniform_grid(1.0, 50)


@pytest.fixture
def ens(grid):
    return simulate_brownian(grid, 400, seed=31)


# ---------------------------------------------------------------------------
# bundle container
# ---------------------------------------------------------------------------

def test_bundle_rejects_out_of_range_survival(grid):
    z = np.full((3, 51), 1.5)
    with pytest.raises(ValueError):
        SupermartingaleBundle(grid=grid, survival=z)
    with pytest.raises(ValueError):
        SupermartingaleBundle(grid=grid, survival=np.zeros((3, 7)))


def test_bundle_rejects_bad_increasing_parts(grid):
    z = np.ones((2, 51))
    bad_start = np.ones((2, 51))
    with pytest.raises(ValueError):
        SupermartingaleBundle(grid=grid, survival=z,
                              arrival_predictable=bad_start)
    decreasing = np.tile(np.linspace(1.0, 0.0, 51), (2, 1))
    decreasing[:, 0] = 0.0
    with pytest.raises(ValueError):
        SupermartingaleBundle(grid=grid, survival=z,
                              arrival_predictable=decreasing)
    with pytest.raises(ValueError):
        SupermartingaleBundle(grid=grid, survival=z,
                              arrival_optional=np.zeros((2, 7)))


def test_bundle_parts_optional(grid):
    z = np.ones((2, 51))
    b = SupermartingaleBundle(grid=grid, survival=z, source="test")
    assert not b.has_decomposition
    with pytest.raises(ValueError):
        _ = b.martingale_part
    with pytest.raises(ValueError):
        _ = b.unit_mean_martingale


def test_indicator_survival_is_left_of_tau(grid, ens):
    s = cox_time(ens, ConstantIntensity(1.0))
    ind = indicator_survival(s)
    assert set(np.unique(ind)) <= {0.0, 1.0}
    np.testing.assert_array_equal(ind[:, 0], 1.0)
    k = grid.index_at(0.5)
    np.testing.assert_array_equal(ind[:, k],
                                  (s.tau > grid.times[k]).astype(float))


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def test_cox_closed_form(grid, ens):
    s = cox_time(ens, ConstantIntensity(1.0))
    b = closed_form_bundle(s)
    assert b.source == "cox"
    np.testing.assert_allclose(b.survival,
                               np.exp(-grid.times)[None, :] * np.ones((400, 1)),
                               rtol=1e-12)
    np.testing.assert_allclose(b.martingale_part, 1.0, rtol=1e-12)
    np.testing.assert_allclose(b.unit_mean_martingale, 1.0, rtol=1e-12)


def test_honest_closed_form(ens):
    s = honest_from_exp_martingale(ens, tail_eps=0.5)
    b = closed_form_bundle(s)
    assert np.all(b.survival <= 1.0 + 1e-12)
    np.testing.assert_allclose(b.arrival_predictable,
                               np.log(s.extra["sup"]), rtol=1e-12)
    # mu = Z + ln sup is a positive mean-one martingale started at 1
    np.testing.assert_allclose(b.unit_mean_martingale[:, 0], 1.0, rtol=1e-12)


def test_last_zero_closed_form_needs_ensemble(grid, ens):
    s = last_zero_before(ens, cutoff=1.0)
    with pytest.raises(ValueError):
        closed_form_bundle(s)
    b = closed_form_bundle(s, ensemble=ens)
    assert not b.has_decomposition
    np.testing.assert_array_equal(b.survival[:, 0], 1.0)
    np.testing.assert_array_equal(b.survival[:, -1], 0.0)


def test_last_zero_closed_form_matches_conditional_law():
    # binned check of P(g > t | W_t) against the erfc formula at one probe
    g = uniform_grid(1.0, 100)
    ens = simulate_brownian(g, 30000, seed=33)
    s = last_zero_before(ens, cutoff=1.0)
    b = closed_form_bundle(s, ensemble=ens)
    k = g.index_at(0.4)
    z = b.survival[:, k]
    alive = (s.tau > g.times[k]).astype(float)
    order = np.argsort(z)
    for chunk in np.array_split(order, 8):
        want = z[chunk].mean()
        got = alive[chunk].mean()
        se = max(np.sqrt(want * (1 - want) / chunk.size), 1e-3)
        assert abs(got - want) < 5 * se


def test_poisson_closed_form():
    g = uniform_grid(1.0, 40)
    s = poisson_first_jump(g, rate=1.0, n_paths=300, seed=3)
    b = closed_form_bundle(s)
    assert set(np.unique(b.survival)) <= {0.0, 1.0}
    te = s.extra["tau_exact"][:, None]
    np.testing.assert_allclose(b.arrival_predictable,
                               np.minimum(g.times[None, :], te), rtol=1e-12)
    np.testing.assert_allclose(b.unit_mean_martingale, 1.0, rtol=1e-12)


def test_floor_violations_counts_hit_paths(grid):
    z = np.ones((4, 51))
    z[0, 10:] = 0.0  # dies before its time
    z[1, 50] = 0.0   # dies exactly at the horizon
    tau_idx = np.array([30, 20, 10, 10])
    b = SupermartingaleBundle(grid=grid, survival=z, source="test")
    assert floor_violations(b, tau_idx) == 0.25


# ---------------------------------------------------------------------------
# survival regression
# ---------------------------------------------------------------------------

def test_regression_spec_validation():
    with pytest.raises(ValueError):
        RegressionSpec(degree=6)
    with pytest.raises(ValueError):
        RegressionSpec(basis="splines")
    with pytest.raises(ValueError):
        RegressionSpec(states=("a", "b"), basis="bins")
    with pytest.raises(ValueError):
        RegressionSpec(states=("a",), basis="bins", n_bins=1)
    with pytest.raises(ValueError):
        RegressionSpec(ridge=-1.0)


def test_intercept_only_fit_is_the_sample_mean():
    alive = np.array([1.0, 1.0, 0.0, 1.0])
    fit = fit_survival(alive, {}, RegressionSpec())
    np.testing.assert_allclose(fit.predict({}), [0.75])
    np.testing.assert_allclose(fit.predict({"x": np.zeros(3)}), 0.75)


def test_polynomial_fit_recovers_linear_truth():
    x = np.linspace(0.0, 1.0, 2000)
    truth = 0.2 + 0.6 * x
    rngen = np.random.default_rng(0)
    alive = (rngen.random(2000) < truth).astype(float)
    spec = RegressionSpec(states=("x",), degree=1)
    fit = fit_survival(alive, {"x": x}, spec)
    pred = fit.predict({"x": x})
    assert np.abs(pred - truth).max() < 0.06
    assert np.all((pred >= 0.0) & (pred <= 1.0))


def test_fit_mean_preserved_with_ridge():
    # unpenalised intercept keeps the fitted mean equal to the sample mean
    rngen = np.random.default_rng(1)
    x = rngen.normal(size=5000)
    alive = (rngen.random(5000) < 0.5).astype(float)
    spec = RegressionSpec(states=("x",), degree=3, ridge=1e-2)
    fit = fit_survival(alive, {"x": x}, spec)
    np.testing.assert_allclose(fit.predict({"x": x}).mean(), alive.mean(),
                               atol=1e-10)


def test_bins_fit_recovers_bin_means():
    x = np.repeat([0.1, 0.9], 50)
    alive = np.concatenate([np.ones(50), np.zeros(50)])
    spec = RegressionSpec(states=("x",), basis="bins", n_bins=2)
    fit = fit_survival(alive, {"x": x}, spec)
    np.testing.assert_allclose(fit.predict({"x": np.array([0.2, 0.8])}),
                               [1.0, 0.0])


def test_ridge_escalates_on_collinear_design():
    x = np.full(100, 2.0)  # constant feature: x, x^2 collinear after scaling
    alive = np.ones(100)
    spec = RegressionSpec(states=("x",), degree=2, ridge=1e-12)
    fit = fit_survival(alive, {"x": x}, spec)
    assert fit.ridge_used > spec.ridge
    np.testing.assert_allclose(fit.predict({"x": x}), 1.0, atol=1e-6)


def test_constant_zero_feature_column_dropped():
    x = np.zeros(50)
    alive = np.ones(50)
    fit = fit_survival(alive, {"x": x}, RegressionSpec(states=("x",), degree=2))
    np.testing.assert_allclose(fit.predict({"x": x}), 1.0, atol=1e-9)


# ---------------------------------------------------------------------------
# increasing-part estimator
# ---------------------------------------------------------------------------

def test_increasing_part_intercept_only_telescopes(grid, ens):
    s = cox_time(ens, ConstantIntensity(1.0))
    alive = indicator_survival(s)
    est = IncreasingPartEstimator(grid)
    est.add(alive[:200])
    est.add(alive[200:])
    res = est.finalize()
    np.testing.assert_allclose(res.mean_curve, 1.0 - alive.mean(axis=0),
                               atol=1e-12)
    assert res.clamp_fraction == 0.0
    assert res.raw_increments.shape == (grid.n_steps,)


def test_increasing_part_wants_features_when_configured(grid, ens):
    s = cox_time(ens, ConstantIntensity(1.0))
    alive = indicator_survival(s)
    est = IncreasingPartEstimator(grid, n_features=1)
    with pytest.raises(ValueError):
        est.add(alive)
    est.add(alive, feats=[ens.w])
    res = est.finalize()
    assert np.all(np.diff(res.mean_curve) >= 0.0)


def test_increasing_part_empty_finalize_raises(grid):
    with pytest.raises(ValueError):
        IncreasingPartEstimator(grid).finalize()
