"""Shared value types: compositions, step paths, marked paths and random streams."""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

Composition = tuple  # tuple[int, ...], left-to-right table sizes

# Absolute tolerance used when validating slope -1 reconstruction of levels.
LEVEL_TOL = 1e-9


class OutOfDomainError(ValueError):
    """Evaluation outside the domain of a path."""


class NonAbsorptionError(RuntimeError):
    """An event budget ran out before the chain was absorbed."""

    def __init__(self, message: str, events: int = 0, state: int | None = None):
        super().__init__(message)
        self.events = events
        self.state = state


class OracleUnreliableError(RuntimeError):
    """A truncated oracle lost more mass than the configured bound."""

    def __init__(self, message: str, overflow: float):
        super().__init__(message)
        self.overflow = overflow


def as_composition(parts: Iterable[int]) -> Composition:
    out = tuple(int(p) for p in parts)
    for p in out:
        if p < 1:
            raise ValueError(f"composition parts must be positive, got {out}")
    return out


def total_mass(c: Sequence[int]) -> int:
    return int(sum(c))


def parse_composition(text: str) -> Composition:
    """Parse ``"1,2"`` (or ``""`` for the empty composition)."""
    text = text.strip().strip("()[]")
    if not text:
        return ()
    return as_composition(int(x) for x in text.split(",") if x.strip())


# ---------------------------------------------------------------------------
# step functions (mark paths)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous integer path on [0, lifetime).

    A closed path ends with the terminal event ``(lifetime, 0)``. An open
    path was cut at a horizon before absorption; it has no terminal event
    and ``lifetime`` is the horizon.
    """

    initial: int
    times: tuple
    values: tuple
    lifetime: float
    open: bool = False

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values differ in length")
        if self.initial < 0:
            raise ValueError("initial value must be nonnegative")
        prev = -np.inf
        for t in self.times:
            if not t > prev:
                raise ValueError("event times must be strictly increasing")
            prev = t
        if self.times and self.times[0] < 0:
            raise ValueError("event times must be nonnegative")
        if self.open:
            if self.times and self.times[-1] >= self.lifetime:
                raise ValueError("open path events must precede the horizon")
        else:
            if not self.lifetime > 0:
                raise ValueError("lifetime must be positive")
            if not self.times or self.values[-1] != 0 or self.times[-1] != self.lifetime:
                raise ValueError("closed path must end with (lifetime, 0)")
            if 0 in self.values[:-1] or self.initial == 0:
                raise ValueError("value 0 may only occur as the terminal event")

    @classmethod
    def constant(cls, value: int, lifetime: float) -> "StepFunction":
        """Constant ``value`` on [0, lifetime), then absorbed."""
        return cls(int(value), (float(lifetime),), (0,), float(lifetime))

    @property
    def zeta(self) -> float:
        return self.lifetime

    @property
    def events(self) -> list:
        return list(zip(self.times, self.values))

    def __call__(self, s: float) -> int:
        return self.value_at(s)

    def value_at(self, s: float) -> int:
        if s < 0 or s > self.lifetime or (s == self.lifetime and not self.open):
            raise OutOfDomainError(f"s={s} outside [0, {self.lifetime})")
        k = bisect.bisect_right(self.times, s)
        return self.initial if k == 0 else self.values[k - 1]

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "times": list(self.times),
            "values": list(self.values),
            "lifetime": self.lifetime,
            "open": self.open,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepFunction":
        return cls(
            int(d["initial"]),
            tuple(float(t) for t in d["times"]),
            tuple(int(v) for v in d["values"]),
            float(d["lifetime"]),
            bool(d.get("open", False)),
        )


def evaluate_step(f: StepFunction, s: float) -> int:
    return f.value_at(s)


# ---------------------------------------------------------------------------
# marked paths


@dataclass(frozen=True)
class Jump:
    """A jump at time U from level B by the lifetime of its mark.

    For an open mark (cut at a level cap) D is the cap rather than a true
    post-jump level.
    """

    U: float
    B: float
    mark: StepFunction

    @property
    def D(self) -> float:
        return self.B + self.mark.lifetime

    @property
    def height(self) -> float:
        return self.mark.lifetime

    @property
    def open(self) -> bool:
        return self.mark.open

    def to_dict(self) -> dict:
        return {"U": self.U, "B": self.B, "mark": self.mark.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "Jump":
        return cls(float(d["U"]), float(d["B"]), StepFunction.from_dict(d["mark"]))


@dataclass(frozen=True)
class MarkedPath:
    """Slope -1 path with marked positive jumps on [origin, horizon].

    ``level0`` is the value at ``origin`` before any jump there.
    """

    jumps: tuple
    origin: float = 0.0
    horizon: float = np.inf
    level0: float = 0.0

    def __post_init__(self):
        if self.horizon < self.origin:
            raise ValueError("horizon precedes origin")
        t, x = self.origin, self.level0
        prev_u = -np.inf
        for j in self.jumps:
            if not j.U > prev_u:
                raise ValueError("jump times must be strictly increasing")
            if j.U < self.origin or j.U > self.horizon:
                raise ValueError("jump time outside [origin, horizon]")
            expect = x - (j.U - t)
            if abs(j.B - expect) > LEVEL_TOL * max(1.0, abs(expect)):
                raise ValueError(f"pre-jump level {j.B} inconsistent with drift ({expect})")
            prev_u = j.U
            t, x = j.U, j.D

    def __len__(self) -> int:
        return len(self.jumps)

    def at(self, t: float) -> float:
        if t < self.origin or t > self.horizon:
            raise OutOfDomainError(f"t={t} outside [{self.origin}, {self.horizon}]")
        k = bisect.bisect_right(self._times, t)
        if k == 0:
            return self.level0 - (t - self.origin)
        j = self.jumps[k - 1]
        return j.D - (t - j.U)

    @property
    def _times(self) -> list:
        # cached lazily; frozen dataclass so go through object.__setattr__
        try:
            return self.__dict__["_times_cache"]
        except KeyError:
            ts = [j.U for j in self.jumps]
            object.__setattr__(self, "_times_cache", ts)
            return ts

    def header(self) -> dict:
        return {
            "kind": "marked_path",
            "origin": self.origin,
            "horizon": None if np.isinf(self.horizon) else self.horizon,
            "level0": self.level0,
            "jumps": len(self.jumps),
        }

    def iter_records(self) -> Iterator[dict]:
        yield self.header()
        for j in self.jumps:
            yield j.to_dict()

    def dump(self, fh: IO[str]) -> None:
        """Write as JSON lines: a header record then one record per jump."""
        for rec in self.iter_records():
            fh.write(json.dumps(rec) + "\n")

    def dumps(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.iter_records())

    @classmethod
    def loads(cls, text: str) -> "MarkedPath":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        if head.get("kind") != "marked_path":
            raise ValueError("not a marked path record stream")
        jumps = tuple(Jump.from_dict(json.loads(ln)) for ln in lines[1:])
        if len(jumps) != head["jumps"]:
            raise ValueError("truncated marked path record stream")
        horizon = np.inf if head["horizon"] is None else float(head["horizon"])
        return cls(jumps, float(head["origin"]), horizon, float(head["level0"]))


def path_at_time(p: MarkedPath, t: float) -> float:
    return p.at(t)


# ---------------------------------------------------------------------------
# random streams


class RandomSource:
    """A seeded PCG64 stream keyed by ``(seed, stream id)``.

    Equal keys give bit-identical draws; distinct stream ids are
    independent children of the same seed sequence.
    """

    def __init__(self, seed: int, stream: int | Sequence[int] = 0):
        if isinstance(stream, (int, np.integer)):
            key = (int(stream),)
        else:
            key = tuple(int(s) for s in stream)
        if any(k < 0 for k in key):
            raise ValueError("stream ids must be nonnegative")
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.key = key
        ss = np.random.SeedSequence(self.seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    @property
    def stream(self):
        return self.key[0] if len(self.key) == 1 else self.key

    def substream(self, i: int) -> "RandomSource":
        return RandomSource(self.seed, self.key + (int(i),))

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed}, stream={self.stream})"


def as_generator(rng) -> np.random.Generator:
    """Accept a RandomSource, a Generator or an int seed."""
    if isinstance(rng, RandomSource):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RandomSource(int(rng)).generator
    raise TypeError(f"cannot use {type(rng).__name__} as a random source")
