"""Counter RNG contracts and equality of the numba/numpy kernel twins."""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import ndtri

from hazardlab import kernels, rng
from hazardlab.grid import uniform_grid


# ---------------------------------------------------------------------------
# counter RNG
# ---------------------------------------------------------------------------

def test_cell_depends_only_on_seed_stream_path_step():
    full = rng.uniforms(7, rng.STREAM_DRIVER, 0, 8, 5)
    part = rng.uniforms(7, rng.STREAM_DRIVER, 5, 3, 5)
    np.testing.assert_array_equal(part, full[5:8])


def test_streams_and_seeds_give_different_draws():
    a = rng.uniforms(7, rng.STREAM_DRIVER, 0, 4, 6)
    b = rng.uniforms(7, rng.STREAM_BRIDGE, 0, 4, 6)
    c = rng.uniforms(8, rng.STREAM_DRIVER, 0, 4, 6)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_uniforms_open_interval_and_distribution():
    u = rng.uniforms(11, rng.STREAM_ZERO, 0, 200, 500).ravel()
    assert u.min() > 0.0
    assert u.max() < 1.0
    assert stats.kstest(u, "uniform").pvalue > 1e-4


def test_normals_are_inverse_cdf_on_the_same_counters():
    u = rng.uniforms(3, rng.STREAM_DRIVER, 2, 5, 7)
    z = rng.standard_normals(3, rng.STREAM_DRIVER, 2, 5, 7)
    np.testing.assert_array_equal(z, ndtri(u))


def test_normals_moments():
    z = rng.standard_normals(19, rng.STREAM_DRIVER, 0, 400, 250).ravel()
    n = z.size
    assert abs(z.mean()) < 4.0 / math.sqrt(n)
    assert abs(z.var() - 1.0) < 4.0 * math.sqrt(2.0 / n)


def test_exponentials_distribution():
    e = rng.exponentials(13, rng.STREAM_JUMP, 0, 100000)
    assert e.min() > 0.0
    assert stats.kstest(e, "expon").pvalue > 1e-4


def test_counter_path_bounds_enforced():
    with pytest.raises(ValueError):
        rng.uniforms(1, rng.STREAM_DRIVER, 2**32 - 1, 4, 2)


# ---------------------------------------------------------------------------
# kernel twins: identical inputs, both backends
# ---------------------------------------------------------------------------

def _inputs():
    grid = uniform_grid(2.0, 64)
    n = 48
    z = rng.standard_normals(5, rng.STREAM_DRIVER, 0, n, 64)
    u = rng.uniforms(5, rng.STREAM_BRIDGE, 0, n, 64)
    theta = rng.exponentials(5, rng.STREAM_THRESHOLD, 0, n)
    # build dependents with plain numpy so both backends see identical bytes
    w = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(z * grid.sqrt_dt[None, :], axis=1)], axis=1)
    x = w - 0.5 * grid.times[None, :]
    cum = np.concatenate(
        [np.zeros((n, 1)),
         np.cumsum(np.abs(w[:, :-1]) * grid.dt[None, :], axis=1)], axis=1)
    a = 1.0 - np.exp(-cum)
    zmat = np.exp(-cum)
    rmax = np.maximum.accumulate(x, axis=1)
    tau_idx = np.clip((theta * 10.0).astype(np.int64), 0, grid.n_steps - 1)
    tau_frac = np.clip(theta - np.floor(theta), 0.0, 1.0)
    return grid, z, u, theta, w, x, cum, a, zmat, rmax, tau_idx, tau_frac


def _evaluate_all():
    grid, z, u, theta, w, x, cum, a, zmat, rmax, tau_idx, tau_frac = _inputs()
    return {
        "scaled_cumsum": kernels.scaled_cumsum(z, grid.sqrt_dt),
        "exp_drift": kernels.exp_drift(w, grid.times, 0.7),
        "running_max": kernels.running_max(x),
        "grid_records": kernels.grid_records(x),
        "bridge_sup": kernels.bridge_sup(x, u, grid.dt),
        "first_crossing": kernels.first_crossing(cum, theta, grid.times),
        "first_crossing_shared": kernels.first_crossing(
            (1.0 * grid.times)[None, :], theta, grid.times),
        "tail_stop": kernels.tail_stop(x, rmax, math.log(1e-2)),
        "last_zero_bridge": kernels.last_zero(w, u, grid.dt, grid.n_steps, True),
        "last_zero_sign": kernels.last_zero(w, u, grid.dt, grid.n_steps, False),
        "hazard_quadrature": kernels.hazard_quadrature(a, zmat, 1e-12),
        "stopped_value": kernels.stopped_value(w, grid.times, tau_idx,
                                               tau_frac, 1.0, -1.0),
        "interp_at": kernels.interp_at(w, tau_idx, tau_frac),
    }


def test_backends_agree(monkeypatch):
    pytest.importorskip("numba")
    monkeypatch.setenv("HAZARD_LAB_BACKEND", "numba")
    nb = _evaluate_all()
    monkeypatch.setenv("HAZARD_LAB_BACKEND", "numpy")
    np_ = _evaluate_all()
    for name in nb:
        got = nb[name] if isinstance(nb[name], tuple) else (nb[name],)
        want = np_[name] if isinstance(np_[name], tuple) else (np_[name],)
        assert len(got) == len(want)
        for g, v in zip(got, want):
            if np.issubdtype(np.asarray(g).dtype, np.integer):
                np.testing.assert_array_equal(g, v, err_msg=name)
            else:
                # libm exp/log may differ from numpy's SIMD loops in the
                # last ulp on some platforms
                np.testing.assert_allclose(g, v, rtol=1e-12, atol=1e-12,
                                           err_msg=name)


# ---------------------------------------------------------------------------
# kernel semantics (run under both backends via the fixture)
# ---------------------------------------------------------------------------

def test_scaled_cumsum_starts_at_zero(backend_name):
    grid = uniform_grid(1.0, 16)
    z = rng.standard_normals(1, rng.STREAM_DRIVER, 0, 5, 16)
    w = kernels.scaled_cumsum(z, grid.sqrt_dt)
    assert w.shape == (5, 17)
    np.testing.assert_array_equal(w[:, 0], 0.0)
    np.testing.assert_allclose(np.diff(w, axis=1), z * grid.sqrt_dt[None, :],
                               rtol=1e-15, atol=1e-15)


def test_running_max_is_prefix_max(backend_name):
    v = np.array([[0.0, -1.0, 2.0, 1.0, 3.0]])
    np.testing.assert_array_equal(kernels.running_max(v),
                                  [[0.0, 0.0, 2.0, 2.0, 3.0]])


def test_grid_records_last_attaining_index(backend_name):
    v = np.array([[0.0, 2.0, 1.0, 2.0]])  # tie: the later record wins
    sup, idx = kernels.grid_records(v)
    np.testing.assert_array_equal(sup, [[0.0, 2.0, 2.0, 2.0]])
    assert idx[0] == 3
    v2 = np.array([[0.0, 2.0, 1.0, 1.5]])
    assert kernels.grid_records(v2)[1][0] == 1


def test_bridge_sup_dominates_endpoints(backend_name):
    grid = uniform_grid(1.0, 32)
    n = 200
    z = rng.standard_normals(9, rng.STREAM_DRIVER, 0, n, 32)
    u = rng.uniforms(9, rng.STREAM_BRIDGE, 0, n, 32)
    x = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(z * grid.sqrt_dt[None, :], axis=1)], axis=1)
    sup, rec_iv, rec = kernels.bridge_sup(x, u, grid.dt)
    assert np.all(np.diff(sup, axis=1) >= 0.0)
    assert np.all(sup >= np.maximum.accumulate(x, axis=1))
    assert np.all((rec_iv >= 0) & (rec_iv < grid.n_steps))
    np.testing.assert_allclose(rec, sup[:, -1], rtol=0, atol=0)


def test_bridge_sup_matches_reflection_law(backend_name):
    # one step on [0, 1]: the interval sup of W is distributed as |N(0,1)|
    n = 40000
    b = rng.standard_normals(21, rng.STREAM_DRIVER, 0, n, 1)
    u = rng.uniforms(21, rng.STREAM_BRIDGE, 0, n, 1)
    x = np.concatenate([np.zeros((n, 1)), b], axis=1)
    sup, _, _ = kernels.bridge_sup(x, u, np.array([1.0]))
    m = sup[:, -1]
    assert m.min() >= 0.0
    res = stats.kstest(m, lambda q: 2.0 * stats.norm.cdf(q) - 1.0)
    assert res.pvalue > 1e-4


def test_first_crossing_interpolates_exactly(backend_name):
    grid = uniform_grid(1.0, 4)
    cum = (2.0 * grid.times)[None, :]  # slope 2
    tau, idx = kernels.first_crossing(cum, np.array([0.5]), grid.times)
    assert idx[0] == 1
    np.testing.assert_allclose(tau[0], 0.25, rtol=1e-15)


def test_first_crossing_censors(backend_name):
    grid = uniform_grid(1.0, 4)
    cum = (1.0 * grid.times)[None, :]
    tau, idx = kernels.first_crossing(cum, np.array([5.0]), grid.times)
    assert idx[0] == -1


def test_tail_stop_first_deep_drawdown(backend_name):
    x = np.array([[0.0, 1.0, 0.5, -2.0, -1.0]])
    r = np.maximum.accumulate(x, axis=1)
    idx = kernels.tail_stop(x, r, math.log(0.1))
    # x - r = 0, 0, -0.5, -3, -2; first below ln(0.1) ~ -2.3 is step 3
    assert idx[0] == 3
    assert kernels.tail_stop(x, r, math.log(1e-6))[0] == -1


def test_last_zero_sign_change_interpolation(backend_name):
    dt = np.array([1.0, 1.0, 1.0])
    w = np.array([[0.0, 2.0, -2.0, -1.0]])
    u = np.full((1, 3), 0.999)  # suppress bridge hits
    g, lastk = kernels.last_zero(w, u, dt, 3, True)
    np.testing.assert_allclose(g[0], 1.5, rtol=1e-15)
    assert lastk[0] == 1  # interval indexed by its left grid point


def test_last_zero_none_found_returns_zero(backend_name):
    dt = np.array([1.0, 1.0])
    w = np.array([[0.0, 1.0, 2.0]])
    u = np.full((1, 2), 0.999)
    g, lastk = kernels.last_zero(w, u, dt, 2, True)
    assert g[0] == 0.0
    assert lastk[0] == 0


def test_last_zero_bridge_hit_reports_midpoint(backend_name):
    dt = np.array([1.0, 1.0])
    w = np.array([[0.0, 0.001, 0.001]])  # same sign step, hit almost sure
    u = np.array([[0.999, 1e-9]])
    g, lastk = kernels.last_zero(w, u, dt, 2, True)
    assert lastk[0] == 1
    np.testing.assert_allclose(g[0], 1.5, rtol=1e-15)
    g2, lastk2 = kernels.last_zero(w, u, dt, 2, False)
    assert g2[0] == 0.0 and lastk2[0] == 0


def test_hazard_quadrature_counts_floored_steps(backend_name):
    a = np.array([[0.0, 0.5, 1.0]])
    z = np.array([[1.0, 0.0, 0.0]])  # second step divides by floored Z
    lam, bad = kernels.hazard_quadrature(a, z, 1e-12)
    np.testing.assert_allclose(lam, [[0.0, 0.5, 0.5]])
    assert bad[0] == 1


def test_stopped_value_levels_and_tau(backend_name):
    grid = uniform_grid(4.0, 4)
    w = np.array([[0.0, 0.5, 1.5, 0.2, 0.0],
                  [0.0, 0.5, 0.2, 0.3, 0.1]])
    tau_idx = np.array([3, 1], dtype=np.int64)
    tau_frac = np.array([0.0, 0.5])
    v = kernels.stopped_value(w, grid.times, tau_idx, tau_frac, 1.0, -1.0)
    assert v[0] == 1.0          # hit the level before tau, clipped there
    np.testing.assert_allclose(v[1], 0.35)  # reached tau first, interpolated


def test_interp_at_linear(backend_name):
    v = np.array([[0.0, 10.0, 20.0]])
    out = kernels.interp_at(v, np.array([1], dtype=np.int64), np.array([0.25]))
    np.testing.assert_allclose(out, [12.5])
