"""Gillespie kernels for birth-death chains with affine rates.

Rates are ``up(m) = us*m + ui`` for m >= 1, ``up(0) = u0`` and
``down(m) = ds*m``. State 0 is absorbing exactly when ``u0 == 0``.
"""
from __future__ import annotations

import math

import numpy as np

from .._backend import njit, use_numba

_SCALAR_BELOW = 32


@njit
def _absorption_times_nb(us, ui, u0, ds, start, size, horizon, budget, rng):
    out = np.empty(size)
    for p in range(size):
        m = start
        t = 0.0
        ev = 0
        res = np.inf
        while True:
            up = us * m + ui if m > 0 else u0
            dn = ds * m
            tot = up + dn
            if tot <= 0.0:
                break
            t += rng.standard_exponential() / tot
            if t >= horizon:
                break
            if rng.random() * tot < up:
                m += 1
            else:
                m -= 1
            ev += 1
            if m == 0 and u0 == 0.0:
                res = t
                break
            if ev >= budget:
                res = np.nan
                break
        out[p] = res
    return out


def _finish_scalar(us, ui, u0, ds, m, t, ev, horizon, budget, rng):
    while True:
        up = us * m + ui if m > 0 else u0
        tot = up + ds * m
        if tot <= 0.0:
            return np.inf
        t += rng.standard_exponential() / tot
        if t >= horizon:
            return np.inf
        m += 1 if rng.random() * tot < up else -1
        ev += 1
        if m == 0 and u0 == 0.0:
            return t
        if ev >= budget:
            return np.nan


def _absorption_times_np(us, ui, u0, ds, start, size, horizon, budget, rng):
    out = np.full(size, np.inf)
    m = np.full(size, start, dtype=np.int64)
    t = np.zeros(size)
    ev = np.zeros(size, dtype=np.int64)
    idx = np.arange(size)
    while idx.size:
        if idx.size <= _SCALAR_BELOW:
            # lockstep stalls on a few long heavy-tailed paths
            for i in idx:
                out[i] = _finish_scalar(us, ui, u0, ds, int(m[i]), float(t[i]), int(ev[i]),
                                        horizon, budget, rng)
            break
        mm = m[idx]
        up = np.where(mm > 0, us * mm + ui, u0)
        tot = up + ds * mm
        live = tot > 0
        idx, mm, up, tot = idx[live], mm[live], up[live], tot[live]
        if not idx.size:
            break
        tn = t[idx] + rng.standard_exponential(idx.size) / tot
        keep = tn < horizon
        idx, mm, up, tot, tn = idx[keep], mm[keep], up[keep], tot[keep], tn[keep]
        step = np.where(rng.random(idx.size) * tot < up, 1, -1)
        mm = mm + step
        m[idx] = mm
        t[idx] = tn
        ev[idx] += 1
        done = (mm == 0) & (u0 == 0.0)
        out[idx[done]] = tn[done]
        blown = ~done & (ev[idx] >= budget)
        out[idx[blown]] = np.nan
        idx = idx[~done & ~blown]
    return out


def absorption_times(rates, start: int, size: int, rng, horizon=np.inf,
                     budget: int = 10**7, backend: str | None = None) -> np.ndarray:
    """Absorption times of ``size`` independent chains from ``start``.

    ``inf`` marks a path still alive at ``horizon`` (or stuck in a state
    with no exits); ``nan`` marks an exhausted event budget.
    """
    us, ui, u0, ds = (float(r) for r in rates)
    fn = _absorption_times_nb if use_numba(backend) else _absorption_times_np
    return fn(us, ui, u0, ds, int(start), int(size), float(horizon), int(budget), rng)


@njit
def _states_at_nb(us, ui, u0, ds, start, times, size, rng):
    r = times.shape[0]
    out = np.empty((size, r), dtype=np.int64)
    for p in range(size):
        m = start
        t = 0.0
        k = 0
        while k < r:
            up = us * m + ui if m > 0 else u0
            dn = ds * m
            tot = up + dn
            if tot <= 0.0:
                tn = np.inf
            else:
                tn = t + rng.standard_exponential() / tot
            while k < r and times[k] < tn:
                out[p, k] = m
                k += 1
            if k >= r:
                break
            if rng.random() * tot < up:
                m += 1
            else:
                m -= 1
            t = tn
    return out


def _states_at_np(us, ui, u0, ds, start, times, size, rng):
    r = times.shape[0]
    out = np.empty((size, r), dtype=np.int64)
    m = np.full(size, start, dtype=np.int64)
    t = np.zeros(size)
    k = np.zeros(size, dtype=np.int64)
    idx = np.arange(size)
    while idx.size:
        mm = m[idx]
        up = np.where(mm > 0, us * mm + ui, u0)
        tot = up + ds * mm
        with np.errstate(divide="ignore"):
            tn = np.where(tot > 0, t[idx] + rng.standard_exponential(idx.size) / tot, np.inf)
        # record every observation time passed before the next event
        while True:
            kk = k[idx]
            pend = kk < r
            hit = np.zeros(idx.size, dtype=bool)
            hit[pend] = times[kk[pend]] < tn[pend]
            if not hit.any():
                break
            out[idx[hit], kk[hit]] = mm[hit]
            k[idx[hit]] += 1
        live = k[idx] < r
        idx, mm, up, tot, tn = idx[live], mm[live], up[live], tot[live], tn[live]
        m[idx] = mm + np.where(rng.random(idx.size) * tot < up, 1, -1)
        t[idx] = tn
    return out


def states_at(rates, start: int, times, size: int, rng, backend: str | None = None) -> np.ndarray:
    """States of ``size`` chains at the sorted observation ``times``."""
    us, ui, u0, ds = (float(r) for r in rates)
    times = np.ascontiguousarray(times, dtype=np.float64)
    if times.size and np.any(np.diff(times) < 0):
        raise ValueError("observation times must be sorted")
    fn = _states_at_nb if use_numba(backend) else _states_at_np
    return fn(us, ui, u0, ds, int(start), times, int(size), rng)


# ---------------------------------------------------------------------------
# unstopped driver of the marked Levy path for Q_alpha marks


@njit
def _table_draw(u, logt, cdf):
    k = np.searchsorted(cdf, u)
    if k == 0:
        return math.exp(logt[0])
    w = (u - cdf[k - 1]) / (cdf[k] - cdf[k - 1])
    return math.exp(logt[k - 1] + w * (logt[k] - logt[k - 1]))


@njit
def _levy_endpoints_nb(alpha, t_end, size, cutoff, logt, cdf, cut, rng):
    out = np.empty(size)
    visits = np.zeros(cutoff, dtype=np.int64)
    cmax = cdf[-1]
    p_up = (1.0 - alpha) / (2.0 - alpha)
    for p in range(size):
        n_jumps = rng.poisson(alpha * t_end)
        visits[:] = 0
        visits[1] = n_jumps
        resid = 0.0
        censored = False
        # excursions that die at their first step only add a visit to 1
        n_up = rng.binomial(n_jumps, p_up) if n_jumps > 0 else 0
        for e in range(n_up):
            m = 2
            while True:
                if m == cutoff:
                    u = rng.random()
                    if u >= cmax:
                        censored = True
                    else:
                        resid += _table_draw(u, logt, cdf)
                    break
                visits[m] += 1
                if rng.random() * (2 * m - alpha) < m - alpha:
                    m += 1
                else:
                    m -= 1
                    if m == 0:
                        break
            if censored or resid - t_end > cut:
                censored = True
                break
        if censored:
            out[p] = np.inf
            continue
        s = resid
        for m in range(1, cutoff):
            if visits[m] > 0:
                s += rng.standard_gamma(float(visits[m])) / (2 * m - alpha)
        out[p] = s - t_end
    return out


def _levy_endpoints_np(alpha, t_end, size, cutoff, logt, cdf, cut, rng):
    out = np.empty(size)
    n_jumps = rng.poisson(alpha * t_end, size)
    p_up = (1.0 - alpha) / (2.0 - alpha)
    n_up = rng.binomial(n_jumps, p_up)
    visits = np.zeros((size, cutoff), dtype=np.int64)
    visits[:, 1] = n_jumps
    resid = np.zeros(size)
    censored = np.zeros(size, dtype=bool)
    owner = np.repeat(np.arange(size), n_up)
    m = np.full(owner.size, 2, dtype=np.int64)
    cmax = cdf[-1]
    while owner.size:
        top = m == cutoff
        if top.any():
            u = rng.random(int(top.sum()))
            cen = u >= cmax
            np.logical_or.at(censored, owner[top][cen], True)
            uu = u[~cen]
            k = np.searchsorted(cdf, uu)
            k1 = np.maximum(k, 1)
            w = np.where(k == 0, 0.0, (uu - cdf[k1 - 1]) / (cdf[k1] - cdf[k1 - 1]))
            lt = np.where(k == 0, logt[0], logt[k1 - 1] + w * (logt[k1] - logt[k1 - 1]))
            np.add.at(resid, owner[top][~cen], np.exp(lt))
            owner, m = owner[~top], m[~top]
            if not owner.size:
                break
        np.add.at(visits, (owner, m), 1)
        go_up = rng.random(owner.size) * (2 * m - alpha) < m - alpha
        m = m + np.where(go_up, 1, -1)
        alive = m > 0
        owner, m = owner[alive], m[alive]
    levels = np.arange(1, cutoff)
    rates = 2 * levels - alpha
    v = visits[:, 1:]
    pos = v > 0
    g = np.zeros(v.shape)
    g[pos] = rng.standard_gamma(v[pos].astype(float))
    hold = (g / rates).sum(axis=1)
    out[:] = hold + resid - t_end
    out[censored | (resid - t_end > cut)] = np.inf
    return out


def levy_endpoints(alpha: float, t_end: float, size: int, cutoff: int, table_logt, table_cdf,
                   cut: float, rng, backend: str | None = None) -> np.ndarray:
    """Endpoints ``X_t`` of the unstopped driver ``-t + sum of jump heights``.

    Jumps arrive at rate alpha and are absorption times of the Q_alpha chain
    from 1. Each is simulated exactly until the chain reaches ``cutoff``;
    the remainder is drawn from the tabulated law of the absorption time
    from ``cutoff`` (log-time grid ``table_logt`` with CDF ``table_cdf``).
    Time spent below the cutoff is aggregated as a Gamma draw per state.
    Paths whose tabulated remainder falls beyond the table, or whose
    remainder alone already exceeds ``t_end + cut``, come back as ``inf``.
    """
    logt = np.ascontiguousarray(table_logt, dtype=np.float64)
    cdf = np.ascontiguousarray(table_cdf, dtype=np.float64)
    if cutoff < 3:
        raise ValueError("cutoff must be at least 3")
    fn = _levy_endpoints_nb if use_numba(backend) else _levy_endpoints_np
    return fn(float(alpha), float(t_end), int(size), int(cutoff), logt, cdf, float(cut), rng)
