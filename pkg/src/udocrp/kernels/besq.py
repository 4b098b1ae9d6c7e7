"""Euler-Maruyama kernels for dY = delta ds + 2 sqrt|Y| dW."""
from __future__ import annotations

import math

import numpy as np

from .._backend import njit, use_numba

EXTENDED, ABSORB, REFLECT = 0, 1, 2
# bridge crossing probability exp(-y/(2h)) is negligible beyond this many h
_BRIDGE_REACH = 40.0


@njit
def _em_nb(a, delta, h, n_steps, size, mode, bridge, record, rng):
    r = record.shape[0]
    vals = np.empty((size, r))
    hit = np.full(size, np.inf)
    sh = math.sqrt(h)
    for p in range(size):
        y = a
        k = 0
        while k < r and record[k] == 0:
            vals[p, k] = y
            k += 1
        dead = mode == ABSORB and y == 0.0
        if dead:
            hit[p] = 0.0
        for i in range(1, n_steps + 1):
            if dead:
                break
            yn = y + delta * h + 2.0 * math.sqrt(abs(y)) * sh * rng.standard_normal()
            if mode == REFLECT:
                yn = abs(yn)
            elif mode == ABSORB:
                if yn <= 0.0:
                    # linear interpolation of the grid crossing
                    hit[p] = (i - 1) * h + h * y / (y - yn) if y > yn else i * h
                    yn = 0.0
                    dead = True
                elif bridge and yn < _BRIDGE_REACH * h:
                    if rng.random() < math.exp(-yn / (2.0 * h)):
                        hit[p] = (i - 0.5) * h
                        yn = 0.0
                        dead = True
            y = yn
            while k < r and record[k] == i:
                vals[p, k] = y
                k += 1
        while k < r:
            vals[p, k] = y
            k += 1
    return vals, hit


def _em_np(a, delta, h, n_steps, size, mode, bridge, record, rng):
    r = record.shape[0]
    vals = np.empty((size, r))
    hit = np.full(size, np.inf)
    y = np.full(size, float(a))
    sh = math.sqrt(h)
    k = 0
    while k < r and record[k] == 0:
        vals[:, k] = y
        k += 1
    alive = np.ones(size, dtype=bool)
    if mode == ABSORB and a == 0.0:
        alive[:] = False
        hit[:] = 0.0
    for i in range(1, n_steps + 1):
        if k >= r and not (mode == ABSORB and alive.any()):
            break
        idx = np.flatnonzero(alive) if mode == ABSORB else slice(None)
        yo = y[idx]
        yn = yo + delta * h + 2.0 * np.sqrt(np.abs(yo)) * sh * rng.standard_normal(yo.shape[0])
        if mode == REFLECT:
            yn = np.abs(yn)
        elif mode == ABSORB:
            cross = yn <= 0.0
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(yo > yn, yo / (yo - yn), 1.0)
            hit[idx[cross]] = (i - 1) * h + h * frac[cross]
            if bridge:
                near = ~cross & (yn < _BRIDGE_REACH * h)
                u = rng.random(yn.shape[0])
                bx = near & (u < np.exp(-np.maximum(yn, 0.0) / (2.0 * h)))
                hit[idx[bx]] = (i - 0.5) * h
                cross = cross | bx
            yn[cross] = 0.0
            alive[idx[cross]] = False
        y[idx] = yn
        while k < r and record[k] == i:
            vals[:, k] = y
            k += 1
    while k < r:
        vals[:, k] = y
        k += 1
    return vals, hit


def euler_maruyama(a: float, delta: float, h: float, n_steps: int, size: int, mode: int,
                   record_steps, rng, bridge: bool = False, backend: str | None = None):
    """Simulate ``size`` paths; return values at ``record_steps`` and hitting times of 0.

    Modes: EXTENDED (raw scheme, sign changes allowed), ABSORB (frozen at
    the first crossing of 0) and REFLECT (|.| after each step, for delta > 0).
    Hitting times are ``inf`` unless the path was absorbed.
    """
    record = np.ascontiguousarray(record_steps, dtype=np.int64)
    if record.size and (np.any(np.diff(record) < 0) or record[0] < 0 or record[-1] > n_steps):
        raise ValueError("record steps must be sorted within [0, n_steps]")
    fn = _em_nb if use_numba(backend) else _em_np
    return fn(float(a), float(delta), float(h), int(n_steps), int(size), int(mode),
              bool(bridge), record, rng)
