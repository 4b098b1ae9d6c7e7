"""Batch kernels for the discrete up/down moves on compositions.

A batch is a 2-d array ``parts`` (one padded composition per row) and a
vector ``k`` of table counts. A composition of n is encoded as an integer
whose bit ``j`` is set when there is a table boundary after customer
``j + 1``.
"""
from __future__ import annotations

import numpy as np

from .._backend import njit, use_numba


@njit
def _up_nb(parts, k, alpha, theta, rng):
    for r in range(parts.shape[0]):
        kr = k[r]
        mass = 0
        for i in range(kr):
            mass += parts[r, i]
        u = rng.random() * (mass + theta)
        if u < theta:
            pos = 0
        else:
            u -= theta
            pos = -1
            for i in range(kr):
                w = parts[r, i]
                if u < w or i == kr - 1:
                    if u < w - alpha:
                        parts[r, i] += 1
                    else:
                        pos = i + 1
                    break
                u -= w
            if pos < 0:
                continue
        for j in range(kr, pos, -1):
            parts[r, j] = parts[r, j - 1]
        parts[r, pos] = 1
        k[r] = kr + 1


@njit
def _down_nb(parts, k, rng):
    for r in range(parts.shape[0]):
        kr = k[r]
        mass = 0
        for i in range(kr):
            mass += parts[r, i]
        u = rng.integers(0, mass)
        for i in range(kr):
            if u < parts[r, i]:
                parts[r, i] -= 1
                if parts[r, i] == 0:
                    for j in range(i, kr - 1):
                        parts[r, j] = parts[r, j + 1]
                    parts[r, kr - 1] = 0
                    k[r] = kr - 1
                break
            u -= parts[r, i]


def _insert_np(parts, k, rows, pos):
    if not rows.size:
        return
    sub = parts[rows]
    cols = np.arange(parts.shape[1])
    shifted = np.concatenate([np.zeros((rows.size, 1), parts.dtype), sub[:, :-1]], axis=1)
    p = pos[:, None]
    sub = np.where(cols < p, sub, np.where(cols == p, 1, shifted))
    parts[rows] = sub
    k[rows] += 1


def _up_np(parts, k, alpha, theta, rng):
    n = parts.shape[0]
    cum = np.cumsum(parts, axis=1)
    mass = cum[:, -1]
    u = rng.random(n) * (mass + theta)
    left = u < theta
    v = u - theta
    i = np.argmax(cum > v[:, None], axis=1)
    # guard against v landing exactly on the total through rounding
    i = np.where(v >= mass, k - 1, i)
    rows = np.arange(n)
    w = parts[rows, i]
    within = v - (cum[rows, i] - w)
    join = ~left & (within < w - alpha)
    parts[rows[join], i[join]] += 1
    ins = ~join
    pos = np.where(left, 0, i + 1)
    _insert_np(parts, k, rows[ins], pos[ins])


def _down_np(parts, k, rng):
    n = parts.shape[0]
    cum = np.cumsum(parts, axis=1)
    u = rng.integers(0, cum[:, -1])
    i = np.argmax(cum > u[:, None], axis=1)
    rows = np.arange(n)
    parts[rows, i] -= 1
    gone = rows[parts[rows, i] == 0]
    if gone.size:
        sub = parts[gone]
        cols = np.arange(parts.shape[1])
        shifted = np.concatenate([sub[:, 1:], np.zeros((gone.size, 1), parts.dtype)], axis=1)
        parts[gone] = np.where(cols[None, :] < i[gone][:, None], sub, shifted)
        k[gone] -= 1


def up_step(parts, k, alpha, theta, rng, backend=None):
    """One ordered-CRP up-step per row, in place. ``parts`` needs a spare column."""
    if np.any(k >= parts.shape[1]):
        raise ValueError("no spare column for a new table")
    fn = _up_nb if use_numba(backend) else _up_np
    fn(parts, k, float(alpha), float(theta), rng)


def down_step(parts, k, rng, backend=None):
    """Remove one uniformly chosen customer per row, in place."""
    fn = _down_nb if use_numba(backend) else _down_np
    fn(parts, k, rng)


def new_batch(compositions, width: int):
    rows = len(compositions)
    parts = np.zeros((rows, width), dtype=np.int64)
    k = np.zeros(rows, dtype=np.int64)
    for r, c in enumerate(compositions):
        parts[r, : len(c)] = c
        k[r] = len(c)
    return parts, k


def encode(parts, k) -> np.ndarray:
    cum = np.cumsum(parts, axis=1)
    cols = np.arange(parts.shape[1])
    cut = cols[None, :] < (k - 1)[:, None]
    if np.any(cum[:, -1] > 63):
        raise ValueError("encoding supports total mass up to 63")
    bits = np.where(cut, np.left_shift(np.int64(1), np.maximum(cum - 1, 0)), 0)
    return bits.sum(axis=1)


def encode_one(c) -> int:
    code, run = 0, 0
    for part in c[:-1]:
        run += part
        code |= 1 << (run - 1)
    return code


def decode(code: int, n: int) -> tuple:
    parts, last = [], 0
    for j in range(n - 1):
        if code >> j & 1:
            parts.append(j + 1 - last)
            last = j + 1
    parts.append(n - last)
    return tuple(parts)
