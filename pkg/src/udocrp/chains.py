"""Integer-valued Markov chains: Q_alpha table sizes, total mass, general Q-matrices.

Simulation is exact (competing exponential clocks). Truncated generators
give brute-force oracles: a dense matrix exponential for small caps and a
stiff forward-equation solve for large ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sps
import scipy.sparse.linalg
from scipy.integrate import BDF

from .core import NonAbsorptionError, OracleUnreliableError, StepFunction, as_generator
from .kernels import birth_death as _bd

DEFAULT_BUDGET = 10**7
# Q_alpha chains are absorbed almost surely, so they run without a cap
UNBOUNDED = 2**62


def default_budget(spec: "RateSpec") -> int:
    """Event budget per path: unbounded for Q_alpha, ``DEFAULT_BUDGET`` otherwise."""
    return UNBOUNDED if spec.kind == "qalpha" else DEFAULT_BUDGET


def _as_law(d) -> tuple:
    """Normalise a distribution on {1, 2, ...} to sorted (value, prob) pairs."""
    if isinstance(d, (int, np.integer)):
        d = {int(d): 1.0}
    items = sorted((int(k), float(v)) for k, v in dict(d).items() if v != 0)
    if not items:
        raise ValueError("empty distribution")
    for k, v in items:
        if k < 1 or v < 0:
            raise ValueError("entry laws live on positive integers with nonnegative mass")
    tot = sum(v for _, v in items)
    if abs(tot - 1.0) > 1e-12:
        raise ValueError(f"entry law sums to {tot}, not 1")
    return tuple(items)


@dataclass(frozen=True)
class RateSpec:
    """A Q-matrix on the nonnegative integers plus entry laws p and p-.

    ``kind`` is ``"qalpha"``, ``"total_mass"`` or ``"general"``. Birth-death
    chains with affine rates carry ``affine = (us, ui, u0, ds)`` meaning
    up-rate ``us*m + ui`` for m >= 1, ``u0`` at 0 and down-rate ``ds*m``;
    they use the compiled kernels. Other general chains supply ``rate_fn``
    mapping a state m to ``{target: rate}``.
    """

    kind: str
    alpha: float | None = None
    theta: float | None = None
    rate_fn: Callable[[int], Mapping[int, float]] | None = None
    affine: tuple | None = None
    entry: tuple = ((1, 1.0),)
    left_entry: tuple = ((1, 1.0),)
    label: str = ""

    @classmethod
    def qalpha(cls, alpha: float) -> "RateSpec":
        alpha = float(alpha)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        return cls("qalpha", alpha=alpha, affine=(1.0, -alpha, 0.0, 1.0), label=f"Qalpha({alpha:g})")

    @classmethod
    def total_mass(cls, theta: float) -> "RateSpec":
        theta = float(theta)
        if theta < 0:
            raise ValueError(f"theta must be nonnegative, got {theta}")
        return cls("total_mass", theta=theta, affine=(1.0, theta, theta, 1.0), label=f"TotalMass({theta:g})")

    @classmethod
    def birth_death(cls, up_slope: float, down_slope: float = 1.0, up_intercept: float = 0.0,
                    entry=1, left_entry=1, label: str = "") -> "RateSpec":
        """General spec with q(m, m+1) = up_slope*m + up_intercept, q(m, m-1) = down_slope*m, m >= 1."""
        if up_slope < 0 or down_slope <= 0 or up_slope + up_intercept < 0:
            raise ValueError("birth-death rates must be nonnegative")
        return cls("general", affine=(float(up_slope), float(up_intercept), 0.0, float(down_slope)),
                   entry=_as_law(entry), left_entry=_as_law(left_entry),
                   label=label or f"BD(up={up_slope:g}m{up_intercept:+g}, down={down_slope:g}m)")

    @classmethod
    def general(cls, rate_fn: Callable[[int], Mapping[int, float]], entry=1, left_entry=1,
                label: str = "general") -> "RateSpec":
        return cls("general", rate_fn=rate_fn, entry=_as_law(entry),
                   left_entry=_as_law(left_entry), label=label)

    @property
    def absorbing(self) -> bool:
        """Whether 0 is absorbing (required for marks)."""
        if self.affine is not None:
            return self.affine[2] == 0.0
        return not self.transitions(0)

    @property
    def is_birth_death(self) -> bool:
        return self.affine is not None

    def transitions(self, m: int) -> list:
        """Enabled moves ``[(target, rate), ...]`` out of state m."""
        if self.affine is not None:
            us, ui, u0, ds = self.affine
            up = us * m + ui if m > 0 else u0
            out = []
            if up > 0:
                out.append((m + 1, up))
            if m > 0 and ds > 0:
                out.append((m - 1, ds * m))
            return out
        raw = self.rate_fn(int(m))
        items = raw.items() if isinstance(raw, Mapping) else raw
        out = []
        for l, q in items:
            l, q = int(l), float(q)
            if l == m or q == 0.0:
                continue
            if q < 0 or math.isnan(q):
                raise ValueError(f"negative rate q({m},{l}) = {q}")
            if math.isinf(q):
                raise ValueError(f"infinite rate q({m},{l})")
            if l < 0:
                raise ValueError(f"transition to negative state {l}")
            out.append((l, q))
        return out

    def row_sum(self, m: int) -> float:
        return sum(q for _, q in self.transitions(m))

    def sample_entry(self, rng, left: bool = False) -> int:
        law = self.left_entry if left else self.entry
        if len(law) == 1:
            return law[0][0]
        g = as_generator(rng)
        vals = [k for k, _ in law]
        probs = [v for _, v in law]
        return int(vals[g.choice(len(vals), p=probs)])

    def mean_entry(self, left: bool = False) -> float:
        return sum(k * v for k, v in (self.left_entry if left else self.entry))


# ---------------------------------------------------------------------------
# simulation


def simulate_chain(spec: RateSpec, start: int, rng, horizon: float | None = None,
                   budget: int | None = None) -> StepFunction:
    """One trajectory from ``start``, until absorption at 0 or until ``horizon``.

    Paths cut at the horizon come back with ``open=True``. ``budget`` caps
    the number of events (see :func:`default_budget`).
    """
    g = as_generator(rng)
    budget = default_budget(spec) if budget is None else int(budget)
    start = int(start)
    if start < 0:
        raise ValueError("start must be nonnegative")
    absorbing = spec.absorbing
    if horizon is None:
        if not absorbing:
            raise ValueError("a horizon is required for chains without absorption at 0")
        if start == 0:
            raise ValueError("chain starts absorbed; lifetime would be 0")
        horizon = math.inf
    m, t = start, 0.0
    times, values = [], []
    affine = spec.affine
    for _ in range(budget):
        if absorbing and m == 0:
            return StepFunction(start, tuple(times), tuple(values), t)
        if affine is not None:
            us, ui, u0, ds = affine
            up = us * m + ui if m > 0 else u0
            tot = up + ds * m
            moves = None
        else:
            moves = spec.transitions(m)
            tot = sum(q for _, q in moves)
        if tot <= 0.0:
            if math.isinf(horizon):
                raise NonAbsorptionError(f"state {m} has no exits and is not 0", len(times), m)
            break
        t += g.standard_exponential() / tot
        if t >= horizon:
            break
        u = g.random() * tot
        if moves is None:
            m = m + 1 if u < up else m - 1
        else:
            for l, q in moves:
                if u < q:
                    break
                u -= q
            m = l
        times.append(t)
        values.append(m)
    else:
        raise NonAbsorptionError(f"event budget of {budget} exhausted", budget, m)
    return StepFunction(start, tuple(times), tuple(values), float(horizon), open=True)


def sample_absorption_time(spec: RateSpec, start: int, rng, budget: int | None = None) -> float:
    """One draw of the absorption time at 0 from ``start``."""
    _check_absorbing(spec)
    budget = default_budget(spec) if budget is None else int(budget)
    if start < 1:
        raise ValueError("start must be positive")
    if spec.affine is not None:
        out = _bd.absorption_times(spec.affine, start, 1, as_generator(rng), budget=budget)[0]
        if math.isnan(out):
            raise NonAbsorptionError(f"no absorption within {budget} events", budget)
        return float(out)
    return simulate_chain(spec, start, rng, budget=budget).lifetime


def absorption_times(spec: RateSpec, start: int, size: int, rng, horizon: float = math.inf,
                     budget: int | None = None, backend: str | None = None) -> np.ndarray:
    """``size`` absorption times; ``inf`` where the path outlives ``horizon``."""
    _check_absorbing(spec)
    budget = default_budget(spec) if budget is None else int(budget)
    g = as_generator(rng)
    if spec.affine is not None:
        out = _bd.absorption_times(spec.affine, start, size, g, horizon, budget, backend)
    else:
        out = np.empty(size)
        for i in range(size):
            try:
                p = simulate_chain(spec, start, g, None if math.isinf(horizon) else horizon, budget)
                out[i] = math.inf if p.open else p.lifetime
            except NonAbsorptionError:
                out[i] = math.nan
    if np.isnan(out).any():
        raise NonAbsorptionError(f"{int(np.isnan(out).sum())} paths exhausted the event budget",
                                 budget)
    return out


def states_at(spec: RateSpec, start: int, times: Sequence[float], size: int, rng,
              backend: str | None = None) -> np.ndarray:
    """States of ``size`` independent chains at sorted ``times``; shape (size, len(times))."""
    g = as_generator(rng)
    times = np.asarray(times, dtype=float)
    if spec.affine is not None:
        return _bd.states_at(spec.affine, start, times, size, g, backend)
    out = np.empty((size, times.size), dtype=np.int64)
    for i in range(size):
        p = simulate_chain(spec, start, g, horizon=float(times[-1]) + 1.0)
        for j, t in enumerate(times):
            out[i, j] = 0 if (not p.open and t >= p.lifetime) else p.value_at(t)
    return out


def _check_absorbing(spec: RateSpec):
    if spec.kind == "total_mass" or not spec.absorbing:
        raise ValueError(f"{spec.label or spec.kind}: 0 is not absorbing, no absorption time")


# ---------------------------------------------------------------------------
# truncated generators and oracles


def truncated_generator(spec: RateSpec, cap: int, sparse: bool = False):
    """Generator on {0, ..., cap, overflow}; moves above ``cap`` go to overflow.

    The overflow state (index ``cap + 1``) is absorbing.
    """
    cap = int(cap)
    if cap < 1:
        raise ValueError("cap must be at least 1")
    n = cap + 2
    if spec.affine is not None:
        us, ui, u0, ds = spec.affine
        m = np.arange(cap + 1, dtype=float)
        up = np.where(m > 0, us * m + ui, u0)
        up = np.maximum(up, 0.0)
        dn = ds * m
        src = np.arange(cap + 1)
        rows = np.concatenate([src, src[1:], src])
        cols = np.concatenate([src + 1, src[1:] - 1, src])
        vals = np.concatenate([up, dn[1:], -(up + dn)])
    else:
        rows, cols, vals = [], [], []
        for m in range(cap + 1):
            out = 0.0
            for l, q in spec.transitions(m):
                rows.append(m)
                cols.append(min(l, cap + 1))
                vals.append(q)
                out += q
            rows.append(m)
            cols.append(m)
            vals.append(-out)
    Q = sps.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    Q.sum_duplicates()
    return Q if sparse else Q.toarray()


def marginal_by_expm(spec: RateSpec, start: int, cap: int, t: float,
                     overflow_bound: float = 1e-6) -> np.ndarray:
    """Row ``start`` of exp(tQ) for the truncated generator (last entry: overflow)."""
    if not 0 <= start <= cap:
        raise ValueError("start must lie in [0, cap]")
    Q = truncated_generator(spec, cap)
    if t == 0:
        row = np.zeros(cap + 2)
        row[start] = 1.0
        return row
    row = scipy.linalg.expm(t * Q)[start]
    row = np.clip(row, 0.0, None)
    row /= row.sum()
    if row[-1] > overflow_bound:
        raise OracleUnreliableError(
            f"overflow mass {row[-1]:.3g} at cap {cap}, t={t} exceeds {overflow_bound:g}", row[-1])
    return row


def _bdf_record(QT, p0, times, pick, rtol, atol):
    times = np.asarray(times, dtype=float)
    out = []
    k = 0
    while k < times.size and times[k] <= 0:
        out.append(pick(p0))
        k += 1
    if k == times.size:
        return np.array(out)
    solver = BDF(lambda t, y: QT @ y, 0.0, p0, float(times[-1]), rtol=rtol, atol=atol, jac=QT)
    while k < times.size:
        if solver.t < times[k]:
            msg = solver.step()
            if solver.status == "failed":
                raise RuntimeError(f"forward equation solver failed: {msg}")
            if solver.t < times[k]:
                continue
        dense = solver.dense_output()
        while k < times.size and times[k] <= solver.t:
            out.append(pick(dense(times[k])))
            k += 1
    return np.array(out)


def forward_marginals(spec: RateSpec, start: int, times: Sequence[float], cap: int,
                      rtol: float = 1e-9, atol: float = 1e-13) -> np.ndarray:
    """Laws at sorted ``times`` from the forward equation; shape (len(times), cap + 2)."""
    QT = truncated_generator(spec, cap, sparse=True).T.tocsc()
    p0 = np.zeros(cap + 2)
    p0[start] = 1.0
    return _bdf_record(QT, p0, times, lambda y: np.clip(y, 0.0, None), rtol, atol)


@dataclass(frozen=True)
class AbsorptionLaw:
    """Tabulated absorption-time CDF on a log grid.

    ``cdf[-1] < 1`` carries the mass beyond the last grid point plus any
    truncation overflow; draws landing there come back as ``inf``.
    """

    grid: np.ndarray
    cdf: np.ndarray
    overflow: float

    @property
    def log_grid(self) -> np.ndarray:
        return np.log(self.grid)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            lt = np.log(np.maximum(t, 1e-300))
        v = np.interp(lt, np.log(self.grid), self.cdf, left=0.0, right=self.cdf[-1])
        return np.where(t <= 0, 0.0, v)

    def sample(self, size: int, rng) -> np.ndarray:
        g = as_generator(rng)
        u = g.random(size)
        out = np.full(size, np.inf)
        ok = u < self.cdf[-1]
        out[ok] = np.exp(np.interp(u[ok], self.cdf, np.log(self.grid)))
        return out


def absorption_law(spec: RateSpec, start: int, horizon: float, cap: int, points: int = 4000,
                   t_min: float | None = None, rtol: float = 1e-10,
                   atol: float = 1e-14) -> AbsorptionLaw:
    """Absorption-time CDF from ``start`` on a log grid up to ``horizon``."""
    _check_absorbing(spec)
    QT = truncated_generator(spec, cap, sparse=True).T.tocsc()
    p0 = np.zeros(cap + 2)
    p0[start] = 1.0
    t_min = t_min if t_min is not None else min(1e-4, horizon * 1e-8)
    grid = np.geomspace(t_min, horizon, points)
    rec = _bdf_record(QT, p0, grid, lambda y: (y[0], y[-1]), rtol, atol)
    cdf = np.maximum.accumulate(np.clip(rec[:, 0], 0.0, 1.0))
    # strictly increasing CDF values are needed for inversion
    cdf = cdf + np.arange(cdf.size) * 1e-17
    return AbsorptionLaw(grid, cdf, float(max(rec[-1, 1], 0.0)))


def expected_absorption_time(spec: RateSpec, cap: int = 2000) -> np.ndarray:
    """E_m(zeta) for m = 0..cap by a linear solve, with moves above ``cap`` suppressed."""
    _check_absorbing(spec)
    Q = truncated_generator(spec, cap, sparse=True).tolil()
    # reflect at the cap: drop the flow into overflow
    over = Q[cap, cap + 1]
    Q[cap, cap + 1] = 0.0
    Q[cap, cap] = Q[cap, cap] + over
    A = -Q.tocsr()[1 : cap + 1, 1 : cap + 1]
    tau = scipy.sparse.linalg.spsolve(A.tocsc(), np.ones(cap))
    return np.concatenate([[0.0], tau])


def mean_entry_absorption(spec: RateSpec, cap: int = 2000) -> float:
    """mu = sum_n p_n E_n(zeta), the criticality functional for the entry law."""
    tau = expected_absorption_time(spec, cap)
    return float(sum(v * tau[k] for k, v in spec.entry))


def estimate_mean_entry_absorption(spec: RateSpec, draws: int, rng,
                                   budget: int = DEFAULT_BUDGET) -> tuple:
    """Monte Carlo estimate of mu and its standard error."""
    g = as_generator(rng)
    starts = [k for k, _ in spec.entry]
    probs = [v for _, v in spec.entry]
    counts = g.multinomial(draws, probs)
    xs = [absorption_times(spec, s, c, g, budget=budget) for s, c in zip(starts, counts) if c]
    x = np.concatenate(xs)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))
