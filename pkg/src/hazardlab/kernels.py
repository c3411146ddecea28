"""Hot path-ensemble kernels: numba @njit loops with pure-numpy twins.

Each public function dispatches on the active backend.  The numba versions
parallelise over paths only; every path writes its own output row, so results
are independent of the worker count.  Reductions never happen inside a
parallel region.

Cross-backend note: integer and max/cumsum kernels agree bit-for-bit between
backends; kernels that call exp/log may differ from the numpy twins in the
last ulp (SIMD libm vs scalar libm), which is why per-run determinism is
defined per backend.
"""

import math

import numpy as np

from .backend import HAS_NUMBA, active_backend

if HAS_NUMBA:
    from numba import njit, prange
else:  # pragma: no cover - numba is present in the supported environments
    prange = range

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# Brownian driver and elementary path transforms
# ---------------------------------------------------------------------------

def _scaled_cumsum_np(z, sqrt_dt):
    n, k = z.shape
    out = np.empty((n, k + 1), dtype=np.float64)
    out[:, 0] = 0.0
    np.cumsum(z * sqrt_dt[None, :], axis=1, out=out[:, 1:])
    return out


@njit(cache=True, parallel=True)
def _scaled_cumsum_nb(z, sqrt_dt):
    n, k = z.shape
    out = np.empty((n, k + 1), dtype=np.float64)
    for i in prange(n):
        acc = 0.0
        out[i, 0] = 0.0
        for j in range(k):
            acc = acc + z[i, j] * sqrt_dt[j]
            out[i, j + 1] = acc
    return out


def scaled_cumsum(z, sqrt_dt):
    """Prefix sums of z[:, j] * sqrt_dt[j] with a zero first column."""
    if active_backend() == "numba":
        return _scaled_cumsum_nb(z, sqrt_dt)
    return _scaled_cumsum_np(z, sqrt_dt)


def _exp_drift_np(w, times, theta):
    return np.exp(theta * w - (0.5 * theta * theta) * times[None, :])


@njit(cache=True, parallel=True)
def _exp_drift_nb(w, times, theta):
    n, k = w.shape
    out = np.empty((n, k), dtype=np.float64)
    half = 0.5 * theta * theta
    for i in prange(n):
        for j in range(k):
            out[i, j] = math.exp(theta * w[i, j] - half * times[j])
    return out


def exp_drift(w, times, theta=1.0):
    """exp(theta * W_t - theta^2 t / 2) along each path."""
    if active_backend() == "numba":
        return _exp_drift_nb(w, times, float(theta))
    return _exp_drift_np(w, times, float(theta))


def _running_max_np(v):
    return np.maximum.accumulate(v, axis=1)


@njit(cache=True, parallel=True)
def _running_max_nb(v):
    n, k = v.shape
    out = np.empty((n, k), dtype=np.float64)
    for i in prange(n):
        m = v[i, 0]
        out[i, 0] = m
        for j in range(1, k):
            if v[i, j] > m:
                m = v[i, j]
            out[i, j] = m
    return out


def running_max(v):
    """Prefix maximum along each path."""
    if active_backend() == "numba":
        return _running_max_nb(v)
    return _running_max_np(v)


# ---------------------------------------------------------------------------
# Records of the grid values and of the exact interval suprema
# ---------------------------------------------------------------------------

def _grid_records_np(v):
    sup = np.maximum.accumulate(v, axis=1)
    rec = v >= sup  # true exactly where the prefix max is (re)attained
    k = v.shape[1]
    last = (k - 1) - np.argmax(rec[:, ::-1], axis=1)
    return sup, last.astype(np.int64)


@njit(cache=True, parallel=True)
def _grid_records_nb(v):
    n, k = v.shape
    sup = np.empty((n, k), dtype=np.float64)
    last = np.empty(n, dtype=np.int64)
    for i in prange(n):
        m = v[i, 0]
        sup[i, 0] = m
        li = 0
        for j in range(1, k):
            if v[i, j] >= m:
                m = v[i, j]
                li = j
            sup[i, j] = m
        last[i] = li
    return sup, last


def grid_records(v):
    """Prefix max plus the last index attaining it, per path."""
    if active_backend() == "numba":
        return _grid_records_nb(v)
    return _grid_records_np(v)


def _bridge_sup_np(x, u, dt):
    a = x[:, :-1]
    b = x[:, 1:]
    m = 0.5 * (a + b + np.sqrt((b - a) ** 2 - 2.0 * dt[None, :] * np.log(u)))
    n, k = u.shape
    r = np.empty((n, k + 1), dtype=np.float64)
    r[:, 0] = x[:, 0]
    np.maximum.accumulate(m, axis=1, out=r[:, 1:])
    np.maximum(r[:, 1:], x[:, 0:1], out=r[:, 1:])
    rec_iv = np.argmax(m, axis=1).astype(np.int64)
    rec_val = m[np.arange(n), rec_iv]
    # a path whose global sup is the starting point keeps interval 0's max
    return r, rec_iv, rec_val


@njit(cache=True, parallel=True)
def _bridge_sup_nb(x, u, dt):
    n = x.shape[0]
    k = x.shape[1] - 1
    r = np.empty((n, k + 1), dtype=np.float64)
    rec_iv = np.empty(n, dtype=np.int64)
    rec_val = np.empty(n, dtype=np.float64)
    for i in prange(n):
        best = -1.0e308
        bi = 0
        cur = x[i, 0]
        r[i, 0] = cur
        for j in range(k):
            a = x[i, j]
            b = x[i, j + 1]
            d = b - a
            m = 0.5 * (a + b + math.sqrt(d * d - 2.0 * dt[j] * math.log(u[i, j])))
            if m > best:
                best = m
                bi = j
            if m > cur:
                cur = m
            if x[i, 0] > cur:
                cur = x[i, 0]
            r[i, j + 1] = cur
        rec_iv[i] = bi
        rec_val[i] = best
    return r, rec_iv, rec_val


def bridge_sup(x, u, dt):
    """Exact running supremum of a Brownian path sampled at grid times.

    The supremum over each interval, conditional on its endpoints, follows
    the reflection-principle law of the Brownian-bridge maximum; u supplies
    one uniform per interval.  Returns the running-sup values at grid times,
    the interval index of the global record and the record value.
    """
    if active_backend() == "numba":
        return _bridge_sup_nb(x, u, dt)
    return _bridge_sup_np(x, u, dt)


# ---------------------------------------------------------------------------
# First crossings, tail stops, last zeros
# ---------------------------------------------------------------------------

def _first_crossing_np(cum, theta, times):
    n = theta.shape[0]
    above = cum[:, 1:] > theta[:, None] if cum.shape[0] == n else cum[0:1, 1:] > theta[:, None]
    hit = above.any(axis=1)
    idx = np.argmax(above, axis=1)
    rows = np.arange(n) if cum.shape[0] == n else np.zeros(n, dtype=np.int64)
    c0 = cum[rows, idx]
    c1 = cum[rows, idx + 1]
    dt = times[idx + 1] - times[idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(c1 > c0, (theta - c0) / (c1 - c0), 0.0)
    tau = times[idx] + frac * dt
    tau = np.where(hit, tau, np.inf)
    out_idx = np.where(hit, idx, -1).astype(np.int64)
    return tau, out_idx


@njit(cache=True, parallel=True)
def _first_crossing_nb(cum, theta, times):
    n = theta.shape[0]
    k = times.shape[0] - 1
    row_step = 1 if cum.shape[0] == n else 0  # 0 broadcasts a shared row
    tau = np.empty(n, dtype=np.float64)
    idx = np.empty(n, dtype=np.int64)
    for i in prange(n):
        row = i * row_step
        t = np.inf
        ii = -1
        for j in range(k):
            c1 = cum[row, j + 1]
            if c1 > theta[i]:
                c0 = cum[row, j]
                frac = (theta[i] - c0) / (c1 - c0)
                t = times[j] + frac * (times[j + 1] - times[j])
                ii = j
                break
        tau[i] = t
        idx[i] = ii
    return tau, idx


def first_crossing(cum, theta, times):
    """First time a nondecreasing cumulative process exceeds a threshold.

    cum has shape (n, K+1) or (1, K+1) shared across paths; crossing times
    are linearly interpolated inside the straddling step.  Paths that never
    cross get tau = inf and index -1.
    """
    if active_backend() == "numba":
        return _first_crossing_nb(cum, theta, times)
    return _first_crossing_np(cum, theta, times)


def _tail_stop_np(x, r, log_eps):
    below = (x - r) < log_eps
    below[:, 0] = False
    hit = below.any(axis=1)
    idx = np.argmax(below, axis=1)
    return np.where(hit, idx, -1).astype(np.int64)


@njit(cache=True, parallel=True)
def _tail_stop_nb(x, r, log_eps):
    n, k = x.shape
    out = np.empty(n, dtype=np.int64)
    for i in prange(n):
        found = np.int64(-1)
        for j in range(1, k):
            if x[i, j] - r[i, j] < log_eps:
                found = j
                break
        out[i] = found
    return out


def tail_stop(x, r, log_eps):
    """First grid index where x - r drops below log_eps; -1 when never."""
    if active_backend() == "numba":
        return _tail_stop_nb(x, r, log_eps)
    return _tail_stop_np(x, r, log_eps)


def _last_zero_np(w, u, dt, upto, use_bridge):
    a = w[:, :upto]
    b = w[:, 1:upto + 1]
    sign_change = a * b <= 0.0
    if use_bridge:
        with np.errstate(over="ignore"):
            phit = np.exp(-2.0 * a * b / dt[None, :upto])
        haszero = sign_change | (u[:, :upto] < phit)
    else:
        haszero = sign_change
    haszero[:, 0] = True  # the path starts at an exact zero
    n = w.shape[0]
    lastk = (upto - 1) - np.argmax(haszero[:, ::-1], axis=1)
    rows = np.arange(n)
    ak = a[rows, lastk]
    bk = b[rows, lastk]
    sc = ak * bk <= 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(sc & (ak != bk), ak / (ak - bk), 0.5)
    edges = dt[:upto].cumsum()
    tleft = np.concatenate([[0.0], edges[:-1]])
    gpos = tleft[lastk] + frac * dt[lastk]
    gpos = np.where(lastk > 0, gpos, 0.0)
    return gpos, lastk.astype(np.int64)


@njit(cache=True, parallel=True)
def _last_zero_nb(w, u, dt, upto, use_bridge):
    n = w.shape[0]
    g = np.empty(n, dtype=np.float64)
    lk = np.empty(n, dtype=np.int64)
    for i in prange(n):
        lastk = 0
        interior = False
        for j in range(1, upto):
            a = w[i, j]
            b = w[i, j + 1]
            zero_here = a * b <= 0.0
            if use_bridge and not zero_here:
                zero_here = u[i, j] < math.exp(-2.0 * a * b / dt[j])
            if zero_here:
                lastk = j
                interior = True
        tleft = 0.0
        for j in range(lastk):
            tleft += dt[j]
        if not interior:
            g[i] = 0.0
            lk[i] = 0
            continue
        a = w[i, lastk]
        b = w[i, lastk + 1]
        if a * b <= 0.0 and a != b:
            frac = a / (a - b)
        else:
            frac = 0.5
        g[i] = tleft + frac * dt[lastk]
        lk[i] = lastk
    return g, lk


def last_zero(w, u, dt, upto, use_bridge=True):
    """Last zero of each path among the first `upto` grid intervals.

    With use_bridge, same-sign intervals are tested for an interior zero via
    the exact bridge-crossing probability exp(-2ab/dt) using one uniform per
    interval; otherwise only endpoint sign changes count.  The position is
    the linear-interpolant zero for sign changes and the interval midpoint
    for interior-only zeros.  Paths with no zero after t=0 return 0.0.
    """
    if active_backend() == "numba":
        return _last_zero_nb(w, u, dt, int(upto), bool(use_bridge))
    return _last_zero_np(w, u, dt, int(upto), bool(use_bridge))


# ---------------------------------------------------------------------------
# Quadrature and evaluation helpers
# ---------------------------------------------------------------------------

def _hazard_quadrature_np(a, z, floor):
    da = np.diff(a, axis=1)
    zl = z[:, :-1]
    ok = zl > floor
    contrib = np.where(ok, da / np.where(ok, zl, 1.0), 0.0)
    contrib = np.where(da != 0.0, contrib, 0.0)
    n, k = da.shape
    lam = np.empty((n, k + 1), dtype=np.float64)
    lam[:, 0] = 0.0
    np.cumsum(contrib, axis=1, out=lam[:, 1:])
    bad = ((da != 0.0) & ~ok).sum(axis=1).astype(np.int64)
    return lam, bad


@njit(cache=True, parallel=True)
def _hazard_quadrature_nb(a, z, floor):
    n = a.shape[0]
    k = a.shape[1] - 1
    lam = np.empty((n, k + 1), dtype=np.float64)
    bad = np.empty(n, dtype=np.int64)
    for i in prange(n):
        acc = 0.0
        nb = np.int64(0)
        lam[i, 0] = 0.0
        for j in range(k):
            da = a[i, j + 1] - a[i, j]
            if da != 0.0:
                zl = z[i, j]
                if zl > floor:
                    acc = acc + da / zl
                else:
                    nb += 1
            lam[i, j + 1] = acc
        bad[i] = nb
    return lam, bad


def hazard_quadrature(a, z, floor=1e-12):
    """Left-endpoint quadrature of integral of da / Z over each path.

    Steps where the integrator would divide by a sub-floor Z while da moves
    are skipped and counted per path (integration restricted to the region
    where Z stays above the floor).
    """
    if active_backend() == "numba":
        return _hazard_quadrature_nb(a, z, float(floor))
    return _hazard_quadrature_np(a, z, float(floor))


def _stopped_value_np(w, times, tau_idx, tau_frac, up, dn):
    n, kp1 = w.shape
    k = kp1 - 1
    up_hit = w[:, 1:] >= up
    dn_hit = w[:, 1:] <= dn
    any_lvl = up_hit | dn_hit
    lvl_idx = np.where(any_lvl.any(axis=1), np.argmax(any_lvl, axis=1), k)
    rows = np.arange(n)
    ti = np.minimum(tau_idx, k - 1)
    val_tau = w[rows, ti] * (1.0 - tau_frac) + w[rows, ti + 1] * tau_frac
    lvl_val = np.where(
        any_lvl.any(axis=1),
        np.where(up_hit[rows, np.minimum(lvl_idx, k - 1)], up, dn),
        0.0,
    )
    stopped_by_level = lvl_idx < tau_idx
    return np.where(stopped_by_level, lvl_val, val_tau)


@njit(cache=True, parallel=True)
def _stopped_value_nb(w, times, tau_idx, tau_frac, up, dn):
    n = w.shape[0]
    k = w.shape[1] - 1
    out = np.empty(n, dtype=np.float64)
    for i in prange(n):
        ti = tau_idx[i]
        if ti > k - 1:
            ti = k - 1
        v = w[i, ti] * (1.0 - tau_frac[i]) + w[i, ti + 1] * tau_frac[i]
        for j in range(k):
            if j >= tau_idx[i]:
                break
            wj = w[i, j + 1]
            if wj >= up:
                v = up
                break
            if wj <= dn:
                v = dn
                break
        out[i] = v
    return out


def stopped_value(w, times, tau_idx, tau_frac, up, dn):
    """W stopped at the earlier of a level crossing and the sampled time.

    Level crossings are detected at grid points and clipped to the level, so
    the result is a bounded functional.  tau_idx/tau_frac locate the sampled
    time inside its straddling step.
    """
    if active_backend() == "numba":
        return _stopped_value_nb(w, times, tau_idx, tau_frac, float(up), float(dn))
    return _stopped_value_np(w, times, tau_idx, tau_frac, float(up), float(dn))


def _interp_at_np(v, tau_idx, tau_frac):
    n, kp1 = v.shape
    rows = np.arange(n)
    ti = np.minimum(tau_idx, kp1 - 2)
    return v[rows, ti] * (1.0 - tau_frac) + v[rows, ti + 1] * tau_frac


@njit(cache=True, parallel=True)
def _interp_at_nb(v, tau_idx, tau_frac):
    n = v.shape[0]
    kp1 = v.shape[1]
    out = np.empty(n, dtype=np.float64)
    for i in prange(n):
        ti = tau_idx[i]
        if ti > kp1 - 2:
            ti = kp1 - 2
        out[i] = v[i, ti] * (1.0 - tau_frac[i]) + v[i, ti + 1] * tau_frac[i]
    return out


def interp_at(v, tau_idx, tau_frac):
    """Per-path linear interpolation of grid values inside one step."""
    if active_backend() == "numba":
        return _interp_at_nb(v, tau_idx, tau_frac)
    return _interp_at_np(v, tau_idx, tau_frac)
