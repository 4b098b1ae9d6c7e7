import math

import numpy as np
import pytest

from udocrp.analytics import birth_death_hitting_cdf
from udocrp.chains import (RateSpec, absorption_law, absorption_times, expected_absorption_time,
                           forward_marginals, marginal_by_expm, mean_entry_absorption,
                           sample_absorption_time, simulate_chain, states_at, truncated_generator)
from udocrp.core import NonAbsorptionError, OracleUnreliableError

from conftest import within_se


def test_qalpha_one_never_moves_up_from_one(rng):
    spec = RateSpec.qalpha(1.0)
    for _ in range(200):
        f = simulate_chain(spec, 1, rng)
        assert f.values == (0,)
    x = absorption_times(spec, 1, 100_000, rng)
    assert within_se(x, 1.0)


def test_qalpha_half_mean(rng):
    x = absorption_times(RateSpec.qalpha(0.5), 1, 1_000_000, rng)
    assert within_se(x, 2.0)


def test_single_transition_general_chain(rng):
    spec = RateSpec.general(lambda m: {0: 1.0} if m == 1 else {})
    x = np.array([sample_absorption_time(spec, 1, rng) for _ in range(20_000)])
    p = 1 - math.exp(-1)
    assert abs(np.mean(x <= 1) - p) <= 3 * math.sqrt(p * (1 - p) / x.size)


def test_exponential_cdf_at_one(rng):
    x = absorption_times(RateSpec.qalpha(1.0), 1, 1_000_000, rng)
    p = 1 - math.exp(-1)
    assert abs(np.mean(x <= 1) - p) <= 3 * math.sqrt(p * (1 - p) / x.size)


def test_total_mass_is_rejected(rng):
    with pytest.raises(ValueError):
        sample_absorption_time(RateSpec.total_mass(0.5), 1, rng)


def test_birth_death_hitting_law(rng):
    x = absorption_times(RateSpec.qalpha(0.0), 2, 1_000_000, rng, horizon=1.0)
    assert abs(np.mean(x <= 1) - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / x.size)


def test_truncated_generator_rows():
    Q = truncated_generator(RateSpec.qalpha(0.5), 2)
    assert Q.shape == (4, 4)
    assert Q[1].tolist() == pytest.approx([1.0, -1.5, 0.5, 0.0])
    assert Q[2].tolist() == pytest.approx([0.0, 2.0, -3.5, 1.5])
    assert np.allclose(Q.sum(axis=1), 0)
    assert truncated_generator(RateSpec.total_mass(1.0), 1).shape == (3, 3)


def test_expm_oracle():
    spec = RateSpec.qalpha(1.0)
    p = marginal_by_expm(spec, 1, 5, 1.0)
    assert p[0] == pytest.approx(1 - math.exp(-1), abs=1e-12)
    assert abs(p.sum() - 1) <= 1e-10
    p0 = marginal_by_expm(spec, 3, 5, 0.0)
    assert p0[3] == 1.0
    for spec, m in ((RateSpec.qalpha(0.3), 2), (RateSpec.total_mass(0.7), 3)):
        assert abs(marginal_by_expm(spec, m, 80, 2.0).sum() - 1) <= 1e-10
    with pytest.raises(OracleUnreliableError):
        marginal_by_expm(RateSpec.total_mass(1.0), 3, 4, 5.0)


@pytest.mark.parametrize("spec,start", [(RateSpec.qalpha(0.5), 3), (RateSpec.total_mass(0.5), 2),
                                        (RateSpec.qalpha(0.0), 1)])
def test_simulated_marginals_match_expm(spec, start, rng):
    times = [0.25, 1.0]
    sim = states_at(spec, start, times, 1_000_000, rng)
    for j, t in enumerate(times):
        exact = marginal_by_expm(spec, start, 40, t)
        emp = np.bincount(np.minimum(sim[:, j], 41), minlength=42) / sim.shape[0]
        assert 0.5 * np.abs(emp - exact).sum() <= 0.005 + exact[-1]


def test_forward_equation_matches_expm():
    spec = RateSpec.qalpha(0.5)
    laws = forward_marginals(spec, 3, [0.5, 2.0], 60)
    for row, t in zip(laws, [0.5, 2.0]):
        assert np.abs(row - marginal_by_expm(spec, 3, 60, t)).max() <= 1e-8


def test_absorption_law_against_closed_form():
    law = absorption_law(RateSpec.qalpha(0.0), 3, 200.0, 3000, points=4000)
    t = np.array([0.1, 1.0, 5.0, 50.0])
    exact = [birth_death_hitting_cdf(3, v) for v in t]
    assert np.abs(law(t) - exact).max() <= 1e-6


def test_absorption_law_sampling(rng):
    law = absorption_law(RateSpec.qalpha(0.0), 2, 1e4, 5000, points=1500)
    x = law.sample(200_000, rng)
    assert abs(np.mean(x <= 1.0) - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / x.size)


def test_holding_time_mean(rng):
    alpha, m = 0.5, 3
    spec = RateSpec.qalpha(alpha)
    holds = []
    while len(holds) < 100_000:
        f = simulate_chain(spec, m, rng, horizon=10.0)
        holds.append(f.times[0])
    assert within_se(holds, 1 / (2 * m - alpha))


def test_expected_absorption_time():
    tau = expected_absorption_time(RateSpec.qalpha(1.0), cap=200)
    assert tau[1] == pytest.approx(1.0, rel=1e-9)
    mu = mean_entry_absorption(RateSpec.birth_death(0.4, entry=2))
    assert mu < 1 / 0.4


def test_monotone_in_start(rng):
    spec = RateSpec.qalpha(0.5)
    a = np.sort(absorption_times(spec, 2, 50_000, rng))
    b = np.sort(absorption_times(spec, 3, 50_000, rng))
    for t in np.geomspace(0.05, 50, 20):
        fa, fb = np.mean(a <= t), np.mean(b <= t)
        assert fb <= fa + 3 * math.sqrt((fa * (1 - fa) + fb * (1 - fb)) / 50_000 + 1e-12)


def test_invalid_rates():
    bad = RateSpec.general(lambda m: {m + 1: -1.0})
    with pytest.raises(ValueError):
        bad.transitions(1)
    inf = RateSpec.general(lambda m: {m + 1: math.inf})
    with pytest.raises(ValueError):
        inf.transitions(1)


def test_budget_exhaustion(rng):
    explode = RateSpec.birth_death(5.0)
    with pytest.raises(NonAbsorptionError):
        simulate_chain(explode, 5, rng, budget=1000)
    with pytest.raises(NonAbsorptionError):
        absorption_times(explode, 5, 10, rng, budget=1000)


def test_open_path_at_horizon(rng):
    f = simulate_chain(RateSpec.qalpha(0.0), 50, rng, horizon=0.1)
    assert f.open and f.lifetime == pytest.approx(0.1)
