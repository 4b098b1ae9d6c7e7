import math

import numpy as np
import pytest
from scipy import stats as st

from udocrp.analytics import besq_absorption_cdf_array
from udocrp.besq import (BesqParams, besq_absorption_times, besq_marginal_sample, besq_marginals,
                         count_zero_hits, simulate_besq)
from udocrp.stats import ks_critical, ks_distance, ks_two_sample


def _exact_cdf(a, delta, s):
    return lambda x: st.ncx2.cdf(np.asarray(x) / s, delta, a / s)


def test_params():
    p = BesqParams(1.0, 0.5, h=0.01, horizon=1.0)
    assert p.n_steps == 100 and not p.absorbing
    assert BesqParams(1.0, -1.0).absorbing and not BesqParams(1.0, -1.0, extended=True).absorbing
    for bad in [dict(h=0.0), dict(horizon=-1.0)]:
        with pytest.raises(ValueError):
            BesqParams(1.0, 1.0, **bad)
    with pytest.raises(ValueError):
        BesqParams(-1.0, 1.0)


@pytest.mark.parametrize("delta", [1.0, 2.0, 3.0])
def test_marginals_against_exact_law(delta, rng):
    p = BesqParams(1.0, delta, h=1e-4, horizon=1.0)
    y = besq_marginals(p, [1.0, 0.25], 20_000, rng)
    for j, s in enumerate([1.0, 0.25]):
        assert st.kstest(y[:, j], _exact_cdf(1.0, delta, s)).pvalue > 1e-3
    assert np.all(y >= 0)


def test_absorption_time_zero_dimension(rng):
    p = BesqParams(1.0, 0.0, h=1e-4, horizon=20.0)
    tau = besq_absorption_times(p, 5000, rng)
    d = ks_distance(tau, lambda t: np.where(t <= 20.0, besq_absorption_cdf_array(1.0, 0.0, t), 1.0))
    assert d <= ks_critical(5000, 1e-3) + 0.01


def test_negative_dimension_absorbs(rng):
    p = BesqParams(1.0, -1.0, h=1e-3, horizon=10.0)
    path = simulate_besq(p, rng)
    assert path.times[0] == 0.0 and path.values[0] == 1.0
    k = np.searchsorted(path.times, path.absorption_time)
    assert np.all(path.values[k:] == 0.0)
    tau = besq_absorption_times(p, 4000, rng)
    assert ks_distance(tau, lambda t: besq_absorption_cdf_array(1.0, -1.0, t)) <= ks_critical(4000, 1e-3) + 0.02


def test_extended_mean_and_symmetry(rng):
    p = BesqParams(1.0, 0.5, h=1e-3, horizon=1.0, extended=True)
    y = besq_marginal_sample(p, 1.0, rng, size=50_000)
    assert abs(y.mean() - 1.5) <= 4 * y.std(ddof=1) / math.sqrt(y.size)
    q = BesqParams(-1.0, -0.5, h=1e-3, horizon=1.0, extended=True)
    z = besq_marginal_sample(q, 1.0, rng, size=50_000)
    assert ks_two_sample(y, -z)[1] > 1e-3


def test_scalar_and_order(rng):
    p = BesqParams(2.0, 1.0, h=1e-3, horizon=1.0)
    assert isinstance(besq_marginal_sample(p, 0.5, rng), float)
    out = besq_marginals(p, [1.0, 0.0, 0.5], 3, rng)
    assert np.all(out[:, 1] == 2.0)
    with pytest.raises(ValueError):
        besq_marginals(p, [1.5], 3, rng)


def test_errors_and_zero_hits(rng):
    with pytest.raises(ValueError):
        besq_absorption_times(BesqParams(1.0, 1.0), 10, rng)
    hits = count_zero_hits(BesqParams(1.0, 2.0, h=1e-3, horizon=1.0), 2000, rng)
    assert 0 <= hits < 2000
