"""Log hazard vs martingale hazard across the model families."""

import numpy as np
import pytest

from hazardlab.survival import SupermartingaleBundle, closed_form_bundle
from hazardlab.grid import uniform_grid
from hazardlab.hazard import (first_crossing_agreement, hazard_gap,
                              honest_decomposition_check,
                              integrated_hazard_exact,
                              integrated_hazard_quadrature, log_hazard,
                              stopping_time_gap_check)
from hazardlab.paths import simulate_brownian
from hazardlab.random_times import (ConstantIntensity, cox_time,
                                    honest_from_exp_martingale,
                                    last_zero_before, poisson_first_jump)


def _cox_bundle(n_steps, n_paths=64, seed=41):
    ens = simulate_brownian(uniform_grid(1.0, n_steps), n_paths, seed=seed)
    s = cox_time(ens, ConstantIntensity(1.0))
    return closed_form_bundle(s)


def test_log_hazard_infinite_where_dead():
    grid = uniform_grid(1.0, 2)
    z = np.array([[1.0, 0.5, 0.0]])
    b = SupermartingaleBundle(grid=grid, survival=z, source="test")
    g = log_hazard(b)
    np.testing.assert_allclose(g[0, :2], [0.0, np.log(2.0)])
    assert np.isinf(g[0, 2])


def test_quadrature_needs_decomposition():
    grid = uniform_grid(1.0, 2)
    b = SupermartingaleBundle(grid=grid, survival=np.ones((1, 3)),
                              source="test")
    with pytest.raises(ValueError):
        integrated_hazard_quadrature(b)
    with pytest.raises(ValueError):
        integrated_hazard_exact(b)
    with pytest.raises(ValueError):
        hazard_gap(b)


# ---------------------------------------------------------------------------
# first-crossing model: the two hazards agree at the quadrature scale
# ---------------------------------------------------------------------------

def test_cox_exact_hazard_is_log_hazard():
    b = _cox_bundle(100)
    np.testing.assert_allclose(integrated_hazard_exact(b), log_hazard(b),
                               rtol=1e-12)
    np.testing.assert_allclose(hazard_gap(b), 0.0, atol=1e-12)


def test_cox_agreement_error_is_first_order():
    # left-endpoint quadrature of constant unit intensity: exact error t*dt/2
    # to leading order, so doubling the steps must nearly halve the sup error
    sup1, skip1 = first_crossing_agreement(_cox_bundle(250))
    sup2, skip2 = first_crossing_agreement(_cox_bundle(500))
    assert skip1 == 0 and skip2 == 0
    dt = 1.0 / 250
    assert abs(sup1 - 0.5 * dt) < 0.2 * dt
    assert sup2 <= 0.6 * sup1


def test_agreement_check_rejects_other_sources():
    grid = uniform_grid(1.0, 2)
    b = SupermartingaleBundle(grid=grid, survival=np.ones((1, 3)),
                              arrival_predictable=np.zeros((1, 3)),
                              source="other")
    with pytest.raises(ValueError):
        first_crossing_agreement(b)


# ---------------------------------------------------------------------------
# argmax model: gap identity pathwise, quadrature in the mean
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["bridge", "grid"])
def test_honest_gap_identity_both_modes(mode):
    grid = uniform_grid(30.0, 300)
    ens = simulate_brownian(grid, 500, seed=43)
    s = honest_from_exp_martingale(ens, sup_mode=mode, tail_eps=1e-2)
    b = closed_form_bundle(s)
    chk = honest_decomposition_check(s, ens, b)
    assert chk.identity_max_err < 1e-10
    assert chk.skipped_steps == 0
    mean_err = np.abs(chk.quadrature_matrix.mean(axis=0)
                      - chk.exact_matrix.mean(axis=0)).max()
    assert mean_err < 10.0 * grid.dt.max()


def test_honest_check_rejects_wrong_kind():
    grid = uniform_grid(1.0, 10)
    ens = simulate_brownian(grid, 20, seed=2)
    s = cox_time(ens, ConstantIntensity(1.0))
    b = closed_form_bundle(s)
    with pytest.raises(ValueError):
        honest_decomposition_check(s, ens, b)


def test_honest_exact_hazard_is_the_increasing_part():
    grid = uniform_grid(10.0, 100)
    ens = simulate_brownian(grid, 50, seed=44)
    s = honest_from_exp_martingale(ens, tail_eps=0.2)
    b = closed_form_bundle(s)
    np.testing.assert_array_equal(integrated_hazard_exact(b),
                                  b.arrival_predictable)
    np.testing.assert_array_equal(integrated_hazard_exact(b),
                                  np.log(s.extra["sup"]))


# ---------------------------------------------------------------------------
# stopping-time control: zero log hazard, linear martingale hazard
# ---------------------------------------------------------------------------

def test_poisson_gap_check_is_exact():
    grid = uniform_grid(1.0, 100)
    s = poisson_first_jump(grid, rate=1.5, n_paths=2000, seed=45)
    b = closed_form_bundle(s)
    chk = stopping_time_gap_check(s, b)
    assert chk.log_hazard_pre_arrival_max == 0.0
    assert chk.quadrature_vs_compensator_max <= 1e-12
    assert chk.partial_gap_max_err <= 1e-12
    assert chk.n_evaluated == int(np.isfinite(s.tau).sum())


def test_poisson_check_rejects_wrong_kind():
    grid = uniform_grid(1.0, 10)
    ens = simulate_brownian(grid, 20, seed=2)
    s = last_zero_before(ens)
    b = closed_form_bundle(s, ensemble=ens)
    with pytest.raises(ValueError):
        stopping_time_gap_check(s, b)


def test_quadrature_skips_and_counts_dead_steps():
    grid = uniform_grid(1.0, 4)
    z = np.array([[1.0, 1.0, 0.0, 0.0, 0.0]])
    ap = np.array([[0.0, 0.25, 0.5, 0.75, 1.0]])
    b = SupermartingaleBundle(grid=grid, survival=z, arrival_predictable=ap,
                              source="test")
    lam, skipped = integrated_hazard_quadrature(b)
    np.testing.assert_allclose(lam[0], [0.0, 0.25, 0.5, 0.5, 0.5])
    assert skipped[0] == 2
