"""Marked Levy paths (jumping chronological contour processes).

A forward path starts with a jump at time 0 whose height is the lifetime
of a table-size chain from n0. Further jumps arrive at rate alpha, each
marked by an independent table chain from the entry law p. The path
drifts down at unit speed and stops at T, its first return to 0.

Level caps
----------
Passing ``level_cap=c`` keeps only what is needed for the skewer on
[0, c]. A mark that would carry its jump above c is simulated only until
it reaches c and stored open, with post-jump level c. The time the path
would spend above c is excised, so jump times are those of the
time-changed path. Every crossing of a level y <= c is reproduced exactly,
and J_T stays finite even in the critical case alpha = 1.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

from . import chains
from .core import Jump, MarkedPath, NonAbsorptionError, RandomSource, StepFunction, as_composition, as_generator
from .ocrp import OcrpParams

DEFAULT_JUMP_BUDGET = 10**6


class CriticalityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ForwardJccp:
    path: MarkedPath
    T: float
    level_cap: float | None = None

    @property
    def jumps(self) -> tuple:
        return self.path.jumps

    @property
    def n_jumps(self) -> int:
        """J_T + 1, counting the initial jump."""
        return len(self.path.jumps)

    @property
    def zeta0(self) -> float:
        return self.path.jumps[0].mark.lifetime


@dataclass(frozen=True)
class NegativeJccp:
    """The path on negative times built from left insertions up to level ``level_max``.

    ``insertion_levels[j-1]`` is A_{-j} (increasing in j) and
    ``excursions[j-1]`` the marked excursion inserted there, which occupies
    the time interval [left[j-1], right[j-1]].
    """

    path: MarkedPath
    insertion_levels: tuple
    excursions: tuple
    left: tuple
    right: tuple
    level_max: float
    level_cap: float | None = None


@functools.lru_cache(maxsize=64)
def _criticality(spec: chains.RateSpec, alpha: float, draws: int) -> tuple:
    rs = RandomSource(0x5EED, 0)
    return chains.estimate_mean_entry_absorption(spec, draws, rs)


def check_criticality(params: OcrpParams, draws: int = 20_000) -> tuple:
    """Estimate mu = sum_n p_n E_n(zeta); warn when mu exceeds 1/alpha by over 3 s.e.

    Returns ``(mu, se, ok)``. Uses a fixed internal stream so the check
    never perturbs caller randomness.
    """
    if params.alpha == 0:
        return (math.nan, math.nan, True)
    mu, se = _criticality(params.spec, params.alpha, draws)
    ok = mu - 1.0 / params.alpha <= 3.0 * se
    if not ok:
        warnings.warn(f"mean absorption time {mu:.4g} (s.e. {se:.2g}) exceeds 1/alpha = "
                      f"{1 / params.alpha:.4g}: the path may not return to 0",
                      CriticalityWarning, stacklevel=3)
    return mu, se, ok


def _mark(spec: chains.RateSpec, start: int, g, room: float | None) -> StepFunction:
    return chains.simulate_chain(spec, start, g, horizon=room)


def build_forward(n0: int, params: OcrpParams, rng, level_cap: float | None = None,
                  budget: int = DEFAULT_JUMP_BUDGET) -> ForwardJccp:
    """One forward path from an initial table of ``n0`` customers."""
    g = as_generator(rng)
    if n0 < 1:
        raise ValueError("n0 must be positive")
    spec = params.spec
    if spec.kind == "general":
        check_criticality(params)
    alpha = params.alpha
    cap = None if level_cap is None else float(level_cap)
    if cap is not None and not cap > 0:
        raise ValueError("level cap must be positive")
    jumps = [Jump(0.0, 0.0, _mark(spec, n0, g, cap))]
    t, x = 0.0, jumps[0].D
    while True:
        if alpha == 0:
            break
        t_next = t + g.standard_exponential() / alpha
        b = x - (t_next - t)
        if b <= 0:
            break
        mark = _mark(spec, spec.sample_entry(g), g, None if cap is None else cap - b)
        jumps.append(Jump(t_next, b, mark))
        if len(jumps) > budget:
            raise NonAbsorptionError(f"path did not return to 0 within {budget} jumps", budget)
        t, x = t_next, b + mark.lifetime
    T = t + x
    return ForwardJccp(MarkedPath(tuple(jumps), 0.0, T, 0.0), T, cap)


def build_concatenated(start: Sequence[int], params: OcrpParams, rng,
                       level_cap: float | None = None,
                       budget: int = DEFAULT_JUMP_BUDGET) -> list:
    """Independent forward paths for each table of ``start``, left to right."""
    start = as_composition(start)
    if not start:
        raise ValueError("start must be nonempty")
    g = as_generator(rng)
    return [build_forward(n, params, g, level_cap, budget) for n in start]


def build_negative(params: OcrpParams, y_max: float, rng, level_cap: float | None = None,
                   budget: int = DEFAULT_JUMP_BUDGET) -> NegativeJccp:
    """Negative-time path from left insertions at rate theta, up to level ``y_max``.

    Only excursions inserted at levels A_{-j} <= y_max are built; no other
    jump can cross a level in [0, y_max].
    """
    if not params.theta > 0:
        raise ValueError("the negative part needs theta > 0")
    if y_max < 0:
        raise ValueError("y_max must be nonnegative")
    g = as_generator(rng)
    spec = params.spec
    levels, excs = [], []
    a = 0.0
    while True:
        a += g.standard_exponential() / params.theta
        if a > y_max:
            break
        room = None if level_cap is None else level_cap - a
        if room is not None and room <= 0:
            break
        levels.append(a)
        excs.append(build_forward(spec.sample_entry(g, left=True), params, g, room, budget))
    # excursion j sits at [L_j, R_j] with L_j = -A_j - (xi_1 + ... + xi_j)
    lefts, rights = [], []
    acc = 0.0
    for a_j, e in zip(levels, excs):
        acc += e.T
        lefts.append(-a_j - acc)
        rights.append(-a_j - acc + e.T)
    jumps = []
    for j in range(len(levels) - 1, -1, -1):
        off_t, off_x = lefts[j], levels[j]
        for jp in excs[j].jumps:
            jumps.append(Jump(jp.U + off_t, jp.B + off_x, jp.mark))
    if levels:
        path = MarkedPath(tuple(jumps), lefts[-1], 0.0, levels[-1])
    else:
        path = MarkedPath((), 0.0, 0.0, 0.0)
    return NegativeJccp(path, tuple(levels), tuple(excs), tuple(lefts), tuple(rights),
                        float(y_max), level_cap)


def running_minimum(path: MarkedPath, t: float) -> float:
    """inf of the path over [origin, t]."""
    lo = path.level0
    for j in path.jumps:
        if j.U > t:
            break
        lo = min(lo, j.B)
    return min(lo, path.at(t))


# ---------------------------------------------------------------------------
# excursions above the running minimum


def excursion_decomposition(f: ForwardJccp) -> tuple:
    """Split a forward path into its initial mark and excursions above the minimum.

    Returns ``(Z0, [(A, excursion), ...])`` where each excursion is a
    ForwardJccp shifted to start at time 0 from level 0, and A is the level
    it leaves the running minimum from. The list is in increasing A, the
    reverse of time order, which is the order in which the skewer sees the
    corresponding tables inserted.
    """
    jumps = f.jumps
    z0 = jumps[0].mark
    ladders = []
    lo = math.inf
    for i in range(1, len(jumps)):
        if jumps[i].B < lo:
            lo = jumps[i].B
            ladders.append(i)
    out = []
    for k, i in enumerate(ladders):
        end = ladders[k + 1] if k + 1 < len(ladders) else len(jumps)
        a, u0 = jumps[i].B, jumps[i].U
        rel = tuple(Jump(jp.U - u0, jp.B - a, jp.mark) for jp in jumps[i:end])
        last = jumps[end - 1]
        dur = last.U + last.D - a - u0
        cap = None if f.level_cap is None else f.level_cap - a
        out.append((a, ForwardJccp(MarkedPath(rel, 0.0, dur, 0.0), dur, cap)))
    out.reverse()
    return z0, out


def reassemble(z0: StepFunction, excursions: Sequence, level_cap: float | None = None) -> ForwardJccp:
    """Inverse of :func:`excursion_decomposition`."""
    jumps = [Jump(0.0, 0.0, z0)]
    t = 0.0
    x = z0.lifetime
    for a, e in sorted(excursions, key=lambda p: -p[0]):
        t += x - a
        for jp in e.jumps:
            jumps.append(Jump(t + jp.U, a + jp.B, jp.mark))
        t += e.T
        x = a
    T = t + x
    return ForwardJccp(MarkedPath(tuple(jumps), 0.0, T, 0.0), T, level_cap)


# ---------------------------------------------------------------------------
# single path to the k-th down-crossing of 0 (diagnostic)


def single_path_conditioned(start: Sequence[int], params: OcrpParams, rng,
                            max_tries: int = 100_000, max_jumps: int = 100_000) -> MarkedPath | None:
    """Run X from 0 (no initial jump) to its k-th down-crossing of 0, k = len(start).

    Rejection-samples until the marks of the k jumps crossing level 0 read
    ``start`` left to right there; returns None if no attempt is accepted.
    The skewer of the result on levels >= 0 is then an oCRP from ``start``.
    Acceptance rates are small, so this is a diagnostic only.
    """
    start = as_composition(start)
    k = len(start)
    g = as_generator(rng)
    spec, alpha = params.spec, params.alpha
    if alpha <= 0:
        raise ValueError("needs alpha > 0")
    for _ in range(max_tries):
        t, x = 0.0, 0.0
        jumps = []
        seen = downs = 0
        while len(jumps) < max_jumps:
            t_next = t + g.standard_exponential() / alpha
            b = x - (t_next - t)
            if x > 0 >= b:
                downs += 1
                if downs == k:
                    return MarkedPath(tuple(jumps), 0.0, t + x, 0.0)
            mark = chains.simulate_chain(spec, spec.sample_entry(g), g)
            jp = Jump(t_next, b, mark)
            jumps.append(jp)
            if b <= 0 < jp.D:
                if mark.value_at(-b) != start[seen]:
                    break
                seen += 1
            t, x = t_next, jp.D
    return None
