"""Squared Bessel processes dY = delta ds + 2 sqrt|Y| dW by Euler-Maruyama."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_generator
from .kernels import besq as _k


@dataclass(frozen=True)
class BesqParams:
    """Start ``a``, dimension ``delta``, step ``h`` and ``horizon``.

    ``extended=False`` (default) simulates BESQ_a(delta): for delta <= 0
    the path is absorbed at its first hit of 0, for delta > 0 it is kept
    nonnegative by reflection. ``extended=True`` runs the raw scheme, which
    may change sign. ``bridge`` adds a Brownian-bridge test for crossings
    between grid points in the absorbed case.
    """

    a: float
    delta: float
    h: float = 1e-4
    horizon: float = 1.0
    extended: bool = False
    bridge: bool = False

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step size must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.extended and self.a < 0:
            raise ValueError("BESQ starts from a >= 0; use extended=True for negative starts")

    @property
    def absorbing(self) -> bool:
        return not self.extended and self.delta <= 0

    @property
    def mode(self) -> int:
        if self.extended:
            return _k.EXTENDED
        return _k.ABSORB if self.delta <= 0 else _k.REFLECT

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.h - 1e-9))


@dataclass(frozen=True)
class BesqPath:
    times: np.ndarray
    values: np.ndarray
    absorption_time: float


def _steps(params: BesqParams, s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s < 0) or np.any(s > params.horizon + 1e-12):
        raise ValueError("observation times must lie in [0, horizon]")
    return np.rint(s / params.h).astype(np.int64)


def simulate_besq(params: BesqParams, rng, every: int = 1, backend: str | None = None) -> BesqPath:
    """One path on the grid (every ``every``-th step is kept)."""
    g = as_generator(rng)
    steps = np.arange(0, params.n_steps + 1, every)
    vals, hit = _k.euler_maruyama(params.a, params.delta, params.h, params.n_steps, 1,
                                  params.mode, steps, g, params.bridge, backend)
    return BesqPath(steps * params.h, vals[0], float(hit[0]))


def besq_marginals(params: BesqParams, s, size: int, rng, backend: str | None = None) -> np.ndarray:
    """Values at times ``s`` for ``size`` paths; shape (size, len(s))."""
    g = as_generator(rng)
    steps = _steps(params, s)
    order = np.argsort(steps, kind="stable")
    n = int(steps.max()) if steps.size else 0
    vals, _ = _k.euler_maruyama(params.a, params.delta, params.h, n, size, params.mode,
                                steps[order], g, params.bridge, backend)
    out = np.empty_like(vals)
    out[:, order] = vals
    return out


def besq_marginal_sample(params: BesqParams, s: float, rng, size: int | None = None,
                         backend: str | None = None):
    """Endpoint at time s; a float, or an array when ``size`` is given."""
    out = besq_marginals(params, [s], 1 if size is None else size, rng, backend)[:, 0]
    return float(out[0]) if size is None else out


def besq_absorption_times(params: BesqParams, size: int, rng, backend: str | None = None) -> np.ndarray:
    """First hitting times of 0 within the horizon (``inf`` if none)."""
    if not params.absorbing:
        raise ValueError("absorption times need delta <= 0 without the extended flag")
    g = as_generator(rng)
    _, hit = _k.euler_maruyama(params.a, params.delta, params.h, params.n_steps, size,
                               params.mode, np.zeros(0, dtype=np.int64), g, params.bridge, backend)
    return hit


def count_zero_hits(params: BesqParams, size: int, rng, backend: str | None = None) -> int:
    """Number of paths whose raw scheme reaches 0 or below within the horizon."""
    p = BesqParams(params.a, params.delta, params.h, params.horizon, extended=False, bridge=False)
    g = as_generator(rng)
    _, hit = _k.euler_maruyama(p.a, p.delta, p.h, p.n_steps, size, _k.ABSORB,
                               np.zeros(0, dtype=np.int64), g, False, backend)
    return int(np.isfinite(hit).sum())
