import json
import math

import numpy as np
import pytest
from scipy import stats as st

from udocrp.ocrp import OcrpParams, simulate_ocrp
from udocrp.stats import (ExperimentReport, InsufficientCountsError, ProbabilityMap, chi_square_composition,
                          empirical_laplace, ks_critical, ks_distance, ks_two_sample, multi_level_equivalence)


def test_empirical_laplace(rng):
    x = rng.exponential(size=200_000)
    est, se = empirical_laplace(x, [0.5, 1.0, 3.0])
    target = 1 / (1 + np.array([0.5, 1.0, 3.0]))
    assert np.all(np.abs(est - target) <= 4 * se)
    est, _ = empirical_laplace([1.0, np.inf], [1.0])
    assert est[0] == pytest.approx(math.exp(-1) / 2)
    with pytest.raises(ValueError):
        empirical_laplace([1.0], [1.0])


def test_ks_two_sample(rng):
    _, p = ks_two_sample(rng.normal(size=5000), rng.normal(size=5000))
    assert p > 1e-3
    _, p = ks_two_sample(rng.normal(size=5000), rng.normal(0.3, size=5000))
    assert p < 1e-6
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])


def test_ks_distance():
    def unif(t):
        return np.clip(t, 0, 1)

    assert ks_distance([0.5], unif) == pytest.approx(0.5)
    assert ks_distance([0.25, 0.75], unif) == pytest.approx(0.25)
    # half the sample censored; F(0.1) = 0.18
    d = ks_distance([0.1, np.inf], lambda t: np.where(t < 0.5, 0.9 * t / 0.5, 0.9))
    assert d == pytest.approx(0.5 - 0.18)
    assert ks_distance([np.inf, np.inf], unif) == 1.0


def test_ks_distance_matches_scipy(rng):
    x = rng.random(1000)
    assert ks_distance(x, lambda t: t) == pytest.approx(st.kstest(x, "uniform").statistic)


def test_ks_critical():
    assert ks_critical(100, 0.05) == pytest.approx(1.3581 / 10, rel=1e-3)
    assert ks_critical(400, 1e-3) < ks_critical(100, 1e-3)


def test_chi_square_same_and_different(rng):
    a = rng.choice(4, size=20_000, p=[0.1, 0.2, 0.3, 0.4]).tolist()
    b = rng.choice(4, size=20_000, p=[0.1, 0.2, 0.3, 0.4]).tolist()
    c = rng.choice(4, size=20_000, p=[0.15, 0.2, 0.3, 0.35]).tolist()
    assert chi_square_composition(a, b).p_value > 1e-3
    assert chi_square_composition(a, c).p_value < 1e-6
    gof = chi_square_composition(a, ProbabilityMap({0: 0.1, 1: 0.2, 2: 0.3, 3: 0.4}))
    assert gof.p_value > 1e-3 and gof.dof == 3


def test_chi_square_pooling():
    a = {(1,): 500, (2,): 500, (9,): 30, (3, 7): 20}
    b = {(1,): 480, (2,): 520, (9,): 25, (3, 7): 25}
    r = chi_square_composition(a, b, mass_cap=8)
    assert r.cells == 3 and r.pooled == 2
    with pytest.raises(InsufficientCountsError):
        chi_square_composition({(1,): 1000, (2,): 3}, ProbabilityMap({(1,): 0.999, (2,): 0.001}))


def test_chi_square_degenerate():
    with pytest.raises(InsufficientCountsError):
        chi_square_composition([(1,)] * 100, [(1,)] * 100)
    with pytest.raises(ValueError):
        chi_square_composition([], [(1,)])
    r = chi_square_composition({(1,): 50, (2,): 50}, ProbabilityMap({(1,): 1.0, (2,): 0.0}))
    assert r.p_value == 0.0


def test_report():
    rep = ExperimentReport("demo", {"alpha": 0.5})
    rep.add("first", np.float64(0.1), True, p_value=0.2, threshold=1e-3)
    rep.add("second", math.nan, True)
    assert rep.passed
    rep.add("third", math.inf, False, threshold=1.0)
    assert not rep.passed
    doc = json.loads(rep.to_json())
    assert doc["checks"][1]["statistic"] == "nan" and doc["checks"][2]["statistic"] == "inf"
    lines = rep.lines()
    assert lines[0].startswith("PASS demo: first") and lines[2].startswith("FAIL")
    assert rep.summary_csv().splitlines()[0] == "experiment,check,statistic,p_value,threshold,passed"


def test_multi_level_equivalence(rng):
    params = OcrpParams(0.5, 0.5)

    def sampler(g):
        return simulate_ocrp((1,), params, 0.8, g)

    rep = multi_level_equivalence(sampler, sampler, [0.3, 0.8], 5000, rng, rng)
    assert rep.passed and len(rep.checks) == 3
    other = OcrpParams(0.5, 2.0)
    rep = multi_level_equivalence(sampler, lambda g: simulate_ocrp((1,), other, 0.8, g), [0.3, 0.8],
                                  5000, rng, rng)
    assert not rep.passed
