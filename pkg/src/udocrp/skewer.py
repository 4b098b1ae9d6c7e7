"""Skewer of marked paths: the composition read across a level.

At level y the skewer lists, left to right in jump order, the current
mark value of every jump with B <= y < D. The negative part (if any)
comes first.
"""
from __future__ import annotations

import bisect
from typing import Iterable, Sequence

from .core import Composition, Jump, MarkedPath
from .jccp import ForwardJccp, NegativeJccp


def _paths(forward) -> list:
    if isinstance(forward, (ForwardJccp, MarkedPath)):
        forward = [forward]
    return list(forward)


def _jumps_and_limit(forward, negative: NegativeJccp | None) -> tuple:
    """All jumps left to right and the highest level the input supports."""
    jumps: list[Jump] = []
    limit = float("inf")
    if negative is not None:
        jumps.extend(negative.path.jumps)
        limit = min(limit, negative.level_max)
        if negative.level_cap is not None:
            limit = min(limit, negative.level_cap)
    for p in _paths(forward):
        if isinstance(p, ForwardJccp):
            if p.level_cap is not None:
                limit = min(limit, p.level_cap)
            p = p.path
        jumps.extend(p.jumps)
    return jumps, limit


def _crosses(j: Jump, y: float) -> bool:
    return j.B <= y and (y < j.D or (j.open and y <= j.D))


def _value_at_level(j: Jump, y: float) -> int:
    # compare levels B + t, not offsets y - B, so ties round as in the trajectory
    v = j.mark.initial
    for t, w in zip(j.mark.times, j.mark.values):
        if j.B + t > y:
            break
        v = w
    return v


def skewer_at_level(forward, y: float, negative: NegativeJccp | None = None) -> Composition:
    """Composition at level ``y`` of forward paths and an optional negative part."""
    if y < 0:
        raise ValueError("level must be nonnegative")
    jumps, limit = _jumps_and_limit(forward, negative)
    if y > limit:
        raise ValueError(f"level {y} exceeds the horizon {limit} the paths were built for")
    return tuple(_value_at_level(j, y) for j in jumps if _crosses(j, y))


def skewer_trajectory(forward, y_max: float, negative: NegativeJccp | None = None) -> list:
    """Level-stamped compositions ``[(level, composition), ...]`` on [0, y_max].

    The first record is at level 0; every later record is a level where a
    table appears, changes size or disappears.
    """
    jumps, limit = _jumps_and_limit(forward, negative)
    if y_max > limit:
        raise ValueError(f"y_max {y_max} exceeds the horizon {limit} the paths were built for")
    events = []
    active: dict[int, int] = {}
    for idx, j in enumerate(jumps):
        if j.B > y_max:
            continue
        if j.B <= 0:
            if _crosses(j, 0.0):
                active[idx] = j.mark.value_at(-j.B)
        else:
            events.append((j.B, idx, j.mark.initial))
        for s, v in zip(j.mark.times, j.mark.values):
            lvl = j.B + s
            if lvl > y_max:
                break
            if lvl > 0:
                events.append((lvl, idx, v))
    events.sort(key=lambda e: e[0])  # stable: ties keep generation order
    order = sorted(active)
    traj = [(0.0, tuple(active[i] for i in order))]
    k = 0
    while k < len(events):
        lvl = events[k][0]
        while k < len(events) and events[k][0] == lvl:
            _, idx, v = events[k]
            if v == 0:
                if idx in active:
                    del active[idx]
                    order.pop(bisect.bisect_left(order, idx))
            else:
                if idx not in active:
                    bisect.insort(order, idx)
                active[idx] = v
            k += 1
        traj.append((lvl, tuple(active[i] for i in order)))
    return traj


def change_levels(forward, y_max: float, negative: NegativeJccp | None = None) -> list:
    """Sorted levels in (0, y_max] at which some crossing jump is born, moves or dies."""
    jumps, _ = _jumps_and_limit(forward, negative)
    out = set()
    for j in jumps:
        if 0 < j.B <= y_max:
            out.add(j.B)
        for s in j.mark.times:
            lvl = j.B + s
            if 0 < lvl <= y_max:
                out.add(lvl)
    return sorted(out)


def crossing_indices(jumps: Sequence[Jump], y: float) -> list:
    """Indices of jumps whose level interval [B, D) contains y."""
    return [i for i, j in enumerate(jumps) if _crosses(j, y)]
