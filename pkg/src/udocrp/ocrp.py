"""Composition-valued processes: the up-down oCRP, its generalisation, the
discrete up/down chain on compositions of n and the stationary law p_n."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .chains import RateSpec
from .core import Composition, as_composition, as_generator
from .kernels import compositions as _ck


@dataclass(frozen=True)
class OcrpParams:
    """alpha in [0, 1], theta >= 0 and the per-table chain (default Q_alpha).

    Entry laws p (right insertions) and p- (left insertions) live on the
    spec and default to a point mass at 1.
    """

    alpha: float
    theta: float = 0.0
    spec: RateSpec | None = field(default=None)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.theta < 0:
            raise ValueError(f"theta must be nonnegative, got {self.theta}")
        if self.spec is None:
            object.__setattr__(self, "spec", RateSpec.qalpha(self.alpha))
        elif not self.spec.absorbing:
            raise ValueError("table chains must be absorbed at 0")

    @property
    def basic(self) -> bool:
        return self.spec.kind == "qalpha" and self.spec.alpha == self.alpha

    @property
    def p(self) -> tuple:
        return self.spec.entry

    @property
    def p_minus(self) -> tuple:
        return self.spec.left_entry


@dataclass(frozen=True)
class Transition:
    """One enabled move. ``kind`` is ``size``, ``right`` or ``left``.

    ``size`` moves table ``table`` to ``size`` customers (0 removes it);
    ``right`` opens a table of ``size`` right of ``table``; ``left`` opens
    one at the left end.
    """

    kind: str
    table: int
    size: int
    target: Composition


def _apply(c: Composition, kind: str, i: int, size: int) -> Composition:
    if kind == "size":
        return c[:i] + ((size,) if size > 0 else ()) + c[i + 1 :]
    if kind == "right":
        return c[: i + 1] + (size,) + c[i + 1 :]
    return (size,) + c


def step_rates(c: Composition, params: OcrpParams) -> list:
    """All enabled transitions out of ``c`` with their positive rates."""
    c = as_composition(c)
    out = []
    a = params.alpha
    for i, n in enumerate(c):
        for l, q in params.spec.transitions(n):
            out.append((Transition("size", i, l, _apply(c, "size", i, l)), q))
        if a > 0:
            for l, pl in params.p:
                out.append((Transition("right", i, l, _apply(c, "right", i, l)), a * pl))
    if params.theta > 0:
        for l, pl in params.p_minus:
            out.append((Transition("left", -1, l, _apply(c, "left", 0, l)), params.theta * pl))
    return out


def simulate_ocrp(start: Iterable[int], params: OcrpParams, y_max: float, rng,
                  budget: int = 10**7) -> list:
    """Trajectory ``[(level, composition), ...]`` of the continuous-time chain on [0, y_max].

    The first record is ``(0.0, start)``; each later record is a jump.
    """
    g = as_generator(rng)
    c = list(as_composition(start))
    a, th = params.alpha, params.theta
    spec = params.spec
    affine = spec.affine
    y = 0.0
    traj = [(0.0, tuple(c))]
    for _ in range(budget):
        k = len(c)
        if affine is not None:
            us, ui, _u0, ds = affine
            per = [(us * n + ui) + ds * n + a for n in c]
        else:
            per = [spec.row_sum(n) + a for n in c]
        total = sum(per) + th
        if total <= 0:
            break
        y += g.standard_exponential() / total
        if y > y_max:
            break
        u = g.random() * total
        if u < th:
            c.insert(0, spec.sample_entry(g, left=True))
        else:
            u -= th
            i = 0
            while i < k - 1 and u >= per[i]:
                u -= per[i]
                i += 1
            n = c[i]
            if u < a:
                c.insert(i + 1, spec.sample_entry(g))
            else:
                u -= a
                if affine is not None:
                    up = us * n + ui
                    target = n + 1 if u < up else n - 1
                else:
                    target = n
                    for l, q in spec.transitions(n):
                        target = l
                        if u < q:
                            break
                        u -= q
                if target == 0:
                    del c[i]
                else:
                    c[i] = target
        traj.append((y, tuple(c)))
    else:
        raise RuntimeError(f"event budget {budget} exhausted below level {y_max}")
    return traj


def composition_at(trajectory: list, y: float) -> Composition:
    """Composition in force at level y of a level-stamped trajectory."""
    lo, hi = 0, len(trajectory)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if trajectory[mid][0] <= y:
            lo = mid
        else:
            hi = mid
    if trajectory[lo][0] > y:
        raise ValueError(f"level {y} precedes the trajectory")
    return trajectory[lo][1]


# ---------------------------------------------------------------------------
# discrete chain on compositions of n


def up_weights(c: Composition, alpha: float, theta: float) -> list:
    """Up-step moves with probabilities: normalised basic up-rates."""
    tot = sum(c) + theta
    out = []
    if theta > 0:
        out.append(((1,) + tuple(c), theta / tot))
    for i, n in enumerate(c):
        if n - alpha > 0:
            out.append((_apply(c, "size", i, n + 1), (n - alpha) / tot))
        if alpha > 0:
            out.append((_apply(c, "right", i, 1), alpha / tot))
    return out


def up_step(c: Composition, alpha: float, theta: float, rng) -> Composition:
    g = as_generator(rng)
    u = g.random() * (sum(c) + theta)
    if u < theta:
        return (1,) + tuple(c)
    u -= theta
    for i, n in enumerate(c):
        if u < n or i == len(c) - 1:
            if u < n - alpha:
                return _apply(c, "size", i, n + 1)
            return _apply(c, "right", i, 1)
        u -= n
    raise ValueError("up-step from the empty composition needs theta > 0")


def down_step(c: Composition, rng) -> Composition:
    """Remove a uniformly chosen customer."""
    if not c:
        raise ValueError("cannot remove a customer from the empty composition")
    g = as_generator(rng)
    u = int(g.integers(0, sum(c)))
    for i, n in enumerate(c):
        if u < n:
            return _apply(c, "size", i, n - 1)
        u -= n
    raise AssertionError("unreachable")


def discrete_up_down_step(c: Composition, alpha: float, theta: float, rng) -> Composition:
    """One up-step followed by one uniform down-step; preserves total mass."""
    c = as_composition(c)
    if not c:
        raise ValueError("discrete chain lives on nonempty compositions")
    g = as_generator(rng)
    return down_step(up_step(c, alpha, theta, g), g)


# ---------------------------------------------------------------------------
# stationary law


def _log_poch(x: float, m: int) -> float:
    """log of the rising factorial x (x+1) ... (x+m-1), for x > 0."""
    if m == 0:
        return 0.0
    return math.lgamma(x + m) - math.lgamma(x)


def _poch(x: float, m: int) -> float:
    if m == 0:
        return 1.0
    if x > 0:
        return math.exp(_log_poch(x, m))
    out = 1.0
    for j in range(m):
        out *= x + j
    return out


def removal_probability(n: int, m: int, alpha: float, theta: float) -> float:
    """r(n, m): probability that the rightmost table of a p_n composition has m customers.

    r(n, m) = C(n, m) ((n-m) alpha + m theta)/n (1-alpha)_{m-1} / (n-m+theta)_m.
    """
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    if m == n:
        # the factor (n theta)/n cancels against (theta)_n = theta (1+theta)_{n-1}
        if n == 1:
            return 1.0
        if alpha == 1.0:
            return 0.0
        return math.exp(_log_poch(1.0 - alpha, n - 1) - _log_poch(1.0 + theta, n - 1))
    num = (n - m) * alpha + m * theta
    if num == 0.0:
        return 0.0
    if alpha == 1.0 and m > 1:
        return 0.0
    logv = (math.lgamma(n + 1) - math.lgamma(m + 1) - math.lgamma(n - m + 1)
            + math.log(num / n) + _log_poch(1.0 - alpha, m - 1) - _log_poch(n - m + theta, m))
    return math.exp(logv)


def composition_probability(c: Iterable[int], alpha: float, theta: float) -> float:
    """p_n(c) for c in left-to-right order.

    The rightmost table is peeled off first: p_n(c) = r(n, c_k) p_{n - c_k}(c_1..c_{k-1}).
    """
    c = as_composition(c)
    if not c:
        raise ValueError("p_n is defined for n >= 1")
    if not 0 <= alpha <= 1 or theta < 0:
        raise ValueError("need alpha in [0, 1] and theta >= 0")
    if alpha == 0 and theta == 0:
        return 1.0 if len(c) == 1 else 0.0
    n = sum(c)
    p = 1.0
    for part in reversed(c):
        p *= removal_probability(n, part, alpha, theta)
        if p == 0.0:
            return 0.0
        n -= part
    return p


def compositions_of(n: int):
    """All compositions of n (2^(n-1) of them)."""
    for code in range(1 << (n - 1)):
        yield _ck.decode(code, n)


def stationary_law(n: int, alpha: float, theta: float) -> dict:
    return {c: composition_probability(c, alpha, theta) for c in compositions_of(n)}


def sample_stationary(n: int, alpha: float, theta: float, rng) -> Composition:
    """One p_n draw by n-1 up-steps from (1)."""
    if n < 1:
        raise ValueError("n must be positive")
    g = as_generator(rng)
    c = (1,)
    for _ in range(n - 1):
        c = up_step(c, alpha, theta, g)
    return c


# batch versions on integer codes ------------------------------------------


def stationary_codes(n: int, alpha: float, theta: float, size: int, rng, backend=None):
    """``size`` p_n draws, returned as (parts, k) arrays with a spare column."""
    g = as_generator(rng)
    parts = np.zeros((size, n + 2), dtype=np.int64)
    parts[:, 0] = 1
    k = np.ones(size, dtype=np.int64)
    for _ in range(n - 1):
        _ck.up_step(parts, k, alpha, theta, g, backend)
    return parts, k


def batch_up_down(parts, k, alpha: float, theta: float, rng, backend=None):
    g = as_generator(rng)
    _ck.up_step(parts, k, alpha, theta, g, backend)
    _ck.down_step(parts, k, g, backend)


def batch_down(parts, k, rng, backend=None):
    _ck.down_step(parts, k, as_generator(rng), backend)


def batch_counts(parts, k) -> dict:
    """Counts per composition of a batch (all rows of equal mass)."""
    n = int(parts[0].sum())
    codes = _ck.encode(parts, k)
    vals, cnt = np.unique(codes, return_counts=True)
    return {_ck.decode(int(v), n): int(c) for v, c in zip(vals, cnt)}
