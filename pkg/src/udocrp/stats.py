"""Test statistics and experiment reports."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats as _st

from .core import as_generator


class InsufficientCountsError(ValueError):
    """Fewer than two cells survive pooling."""


# ---------------------------------------------------------------------------
# reals


def empirical_laplace(samples, lambdas) -> tuple:
    """Mean of exp(-lam x) per lam with its standard error. ``inf`` samples contribute 0."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    est = np.empty(lam.size)
    se = np.empty(lam.size)
    for i, l in enumerate(lam):
        with np.errstate(over="ignore"):
            v = np.exp(-l * x)
        est[i] = v.mean()
        se[i] = v.std(ddof=1) / math.sqrt(x.size)
    return est, se


def ks_two_sample(x, y) -> tuple:
    """Two-sample KS statistic with its asymptotic p-value."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if not x.size or not y.size:
        raise ValueError("both samples must be nonempty")
    r = _st.ks_2samp(x, y, method="asymp")
    return float(r.statistic), float(r.pvalue)


def ks_distance(samples, cdf: Callable) -> float:
    """sup |F_emp - F| for a vectorised CDF; ``inf`` samples mean "beyond every t".

    With censored samples the empirical CDF never reaches 1, so the
    distance is at least the censored fraction minus the model's mass
    beyond the last finite sample.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    fin = x[np.isfinite(x)]
    m = fin.size
    if m == 0:
        return 1.0
    F = np.asarray(cdf(fin), dtype=float)
    i = np.arange(1, m + 1)
    d = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    # beyond the last finite sample the empirical CDF stays at m/n
    d = max(d, 1.0 - m / n - (1.0 - F[-1])) if m < n else d
    return float(d)


def ks_critical(n: int, gamma: float) -> float:
    """Asymptotic one-sample KS critical value at level gamma."""
    return float(_st.kstwobign.isf(gamma) / math.sqrt(n))


# ---------------------------------------------------------------------------
# compositions


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    p_value: float
    cells: int
    pooled: int

    def to_dict(self) -> dict:
        return asdict(self)


_TAIL = ("tail",)


def _counts(x) -> Counter:
    if isinstance(x, Mapping):
        return Counter({k: int(v) for k, v in x.items()})
    return Counter(x)


def _mass(cat) -> int:
    return sum(cat) if isinstance(cat, tuple) else int(cat)


def chi_square_composition(samples_a, reference, mass_cap: int = 8, min_expected: float = 5.0,
                           mass_of: Callable = _mass) -> ChiSquareResult:
    """Pearson chi-square over composition categories.

    ``samples_a`` is a sequence of hashable categories or a mapping of
    counts. ``reference`` is either another such sample (two-sample test)
    or a :class:`ProbabilityMap` holding an exact law. Categories with mass above
    ``mass_cap`` share one tail cell; cells whose expected count falls
    below ``min_expected`` are merged into the tail as well.
    """
    a = _counts(samples_a)
    if isinstance(reference, ProbabilityMap):
        return _chi_gof(a, reference.probs, mass_cap, min_expected, mass_of)
    return _chi_two(a, _counts(reference), mass_cap, min_expected, mass_of)


@dataclass(frozen=True)
class ProbabilityMap:
    """Explicit reference law for :func:`chi_square_composition`."""

    probs: Mapping


def _chi_two(a: Counter, b: Counter, mass_cap, min_expected, mass_of) -> ChiSquareResult:
    na, nb = sum(a.values()), sum(b.values())
    if na == 0 or nb == 0:
        raise ValueError("empty sample")
    fa, fb = na / (na + nb), nb / (na + nb)
    cats = set(a) | set(b)
    cells = {}
    tail_a = tail_b = 0
    pooled = 0
    for c in cats:
        ca, cb = a.get(c, 0), b.get(c, 0)
        tot = ca + cb
        if mass_of(c) > mass_cap or min(fa, fb) * tot < min_expected:
            tail_a += ca
            tail_b += cb
            pooled += 1
        else:
            cells[c] = (ca, cb)
    if tail_a + tail_b > 0:
        if min(fa, fb) * (tail_a + tail_b) < min_expected and cells:
            # fold a thin tail into the smallest regular cell
            c = min(cells, key=lambda k: sum(cells[k]))
            ca, cb = cells.pop(c)
            tail_a, tail_b = tail_a + ca, tail_b + cb
        cells[_TAIL] = (tail_a, tail_b)
    if len(cells) < 2:
        raise InsufficientCountsError("fewer than two cells with enough expected counts")
    obs = np.array(list(cells.values()), dtype=float)
    tot = obs.sum(axis=1)
    exp = np.stack([tot * fa, tot * fb], axis=1)
    stat = float(((obs - exp) ** 2 / exp).sum())
    dof = len(cells) - 1
    return ChiSquareResult(stat, dof, float(_st.chi2.sf(stat, dof)), len(cells), pooled)


def _chi_gof(a: Counter, probs: Mapping, mass_cap, min_expected, mass_of) -> ChiSquareResult:
    n = sum(a.values())
    if n == 0:
        raise ValueError("empty sample")
    cells = {c: (a.get(c, 0), p) for c, p in probs.items()
             if mass_of(c) <= mass_cap and n * p >= min_expected}
    pooled = len(probs) - len(cells)
    # the tail collects pooled categories and anything the reference omits
    tail_o = n - sum(o for o, _ in cells.values())
    tail_p = max(0.0, 1.0 - sum(p for _, p in cells.values()))
    if tail_o > 0 or tail_p > 0:
        # a tail the reference calls impossible stays separate so it is rejected
        if n * tail_p < min_expected and cells and tail_p > 0:
            c = min(cells, key=lambda k: cells[k][1])
            o, p = cells.pop(c)
            tail_o, tail_p = tail_o + o, tail_p + p
        cells[_TAIL] = (tail_o, tail_p)
    if len(cells) < 2:
        raise InsufficientCountsError("fewer than two cells with enough expected counts")
    obs = np.array([o for o, _ in cells.values()], dtype=float)
    exp = np.array([p for _, p in cells.values()]) * n
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(exp > 0, (obs - exp) ** 2 / exp, np.where(obs > 0, np.inf, 0.0))
    stat = float(terms.sum())
    dof = len(cells) - 1
    p = 0.0 if math.isinf(stat) else float(_st.chi2.sf(stat, dof))
    return ChiSquareResult(stat, dof, p, len(cells), pooled)


# ---------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    """Outcome of one verification run.

    ``checks`` holds one row per individual test: its name, the statistic,
    what it was compared with (p-value floor or tolerance) and the verdict.
    """

    name: str
    parameters: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def add(self, check: str, statistic: float, passed: bool, *, p_value: float | None = None,
            threshold: float | None = None, **extra) -> dict:
        row = {"check": check, "statistic": _clean(statistic), "p_value": _clean(p_value),
               "threshold": _clean(threshold), "passed": bool(passed)}
        row.update({k: _clean(v) for k, v in extra.items()})
        self.checks.append(row)
        return row

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "parameters": _clean(self.parameters),
            "samples": _clean(self.samples),
            "checks": self.checks,
            "notes": list(self.notes),
            "tables": _clean(self.tables),
        }

    def to_json(self, **kw) -> str:
        kw.setdefault("indent", 2)
        kw.setdefault("sort_keys", True)
        return json.dumps(self.to_dict(), **kw)

    def summary_rows(self) -> list:
        return [{"experiment": self.name, **{k: r.get(k) for k in
                 ("check", "statistic", "p_value", "threshold", "passed")}} for r in self.checks]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, ["experiment", "check", "statistic", "p_value", "threshold", "passed"],
                           lineterminator="\n")
        w.writeheader()
        w.writerows(self.summary_rows())
        return buf.getvalue()

    def lines(self) -> list:
        out = []
        for r in self.checks:
            stat = r["statistic"]
            extra = f" p={r['p_value']:.3g}" if r["p_value"] is not None else ""
            thr = f" thr={r['threshold']:.3g}" if r["threshold"] is not None else ""
            s = f"{stat:.4g}" if isinstance(stat, float) else str(stat)
            out.append(f"{'PASS' if r['passed'] else 'FAIL'} {self.name}: {r['check']} stat={s}{extra}{thr}")
        return out


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ---------------------------------------------------------------------------
# multi-level equivalence of composition-valued processes


def _at(traj, y):
    lo, hi = 0, len(traj)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if traj[mid][0] <= y:
            lo = mid
        else:
            hi = mid
    return traj[lo][1]


def observe(sampler: Callable, levels: Sequence[float], replicates: int, rng) -> list:
    """Compositions at ``levels`` for each of ``replicates`` sampled trajectories."""
    g = as_generator(rng)
    out = []
    for _ in range(replicates):
        traj = sampler(g)
        out.append(tuple(_at(traj, y) for y in levels))
    return out


def multi_level_equivalence(sampler_a: Callable, sampler_b: Callable, levels: Sequence[float],
                            replicates: int, rng_a, rng_b, mass_cap: int = 8, gamma: float = 1e-3,
                            name: str = "multi-level equivalence", obs_a: list | None = None,
                            obs_b: list | None = None) -> ExperimentReport:
    """Compare two trajectory laws on one- and two-level marginals.

    Runs a chi-square test at each level and a joint test on pairs
    (composition at the first level, total mass at the last level). The
    family passes when every p-value clears gamma / (number of tests).
    Precomputed observations may be passed as ``obs_a`` / ``obs_b``.
    """
    levels = list(levels)
    if obs_a is None:
        obs_a = observe(sampler_a, levels, replicates, rng_a)
    if obs_b is None:
        obs_b = observe(sampler_b, levels, replicates, rng_b)
    rep = ExperimentReport(name, {"levels": levels, "mass_cap": mass_cap, "gamma": gamma},
                           {"replicates_a": len(obs_a), "replicates_b": len(obs_b)})
    results = []
    for j, y in enumerate(levels):
        r = chi_square_composition([o[j] for o in obs_a], [o[j] for o in obs_b], mass_cap)
        results.append((f"level {y:g}", r))
    if len(levels) > 1:
        def pair(o):
            c = o[0] if sum(o[0]) <= mass_cap else ("tail",)
            return (c, min(sum(o[-1]), mass_cap + 1))

        def pmass(cat):
            return 0 if cat[0] == ("tail",) else sum(cat[0])

        r = chi_square_composition([pair(o) for o in obs_a], [pair(o) for o in obs_b],
                                   mass_cap, mass_of=pmass)
        results.append((f"joint (composition at {levels[0]:g}, mass at {levels[-1]:g})", r))
    floor = gamma / len(results)
    for label, r in results:
        rep.add(label, r.statistic, r.p_value >= floor, p_value=r.p_value, threshold=floor,
                dof=r.dof)
    return rep
