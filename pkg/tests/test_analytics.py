import math

import numpy as np
import pytest

from udocrp import analytics as an
from udocrp.chains import RateSpec, absorption_times
from udocrp.stats import empirical_laplace

mp = pytest.importorskip("mpmath")
mp.mp.dps = 40


def _gamma_oracle(a, z):
    return float(mp.quad(lambda t: mp.e ** (-t) * t ** (a - 1), [z, z + 1, z + 10, mp.inf]))


@pytest.mark.parametrize("a,z", [(1.0, 1.0), (2.0, 2.0), (1.5, 0.5), (0.3, 0.01), (0.5, 5.0),
                                 (2.999, 40.0), (1.8, 1.7), (1.3, 2.3), (2.5, 3.5), (0.01, 0.2)])
def test_upper_incomplete_gamma(a, z):
    assert an.upper_incomplete_gamma(a, z) == pytest.approx(_gamma_oracle(a, z), rel=1e-12)


def test_incomplete_gamma_closed_forms():
    assert an.upper_incomplete_gamma(1.0, 1.0) == pytest.approx(0.36787944117144233, rel=1e-14)
    assert an.upper_incomplete_gamma(2.0, 2.0) == pytest.approx(0.40600584970983811, rel=1e-14)
    assert an.regularized_lower_gamma(1.5, 0.7) + an.regularized_upper_gamma(1.5, 0.7) == pytest.approx(1.0)


@pytest.mark.parametrize("a,z", [(0.0, 1.0), (3.5, 1.0), (1.0, 0.0), (1.0, -1.0)])
def test_incomplete_gamma_domain(a, z):
    with pytest.raises(an.DomainError):
        an.upper_incomplete_gamma(a, z)


def _laplace_oracle(alpha, lam):
    alpha, lam = mp.mpf(alpha), mp.mpf(lam)
    return float(1 - lam / alpha + lam ** (1 + alpha) / (alpha * mp.e ** lam * mp.gammainc(1 + alpha, lam)))


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8, 1.0])
@pytest.mark.parametrize("lam", [0.01, 0.5, 1.0, 2.0, 30.0])
def test_zeta_laplace_against_high_precision(alpha, lam):
    assert an.zeta_laplace(alpha, lam) == pytest.approx(_laplace_oracle(alpha, lam), rel=1e-11)


def test_zeta_laplace_exponential_case():
    assert an.zeta_laplace(1.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    for lam in (0.1, 3.0):
        assert an.zeta_laplace(1.0, lam) == pytest.approx(1 / (1 + lam), rel=1e-13)
    with pytest.raises(an.DomainError):
        an.zeta_laplace(0.0, 1.0)


@pytest.mark.parametrize("alpha", [0.8, 1.0])
def test_slope_at_zero(alpha):
    lam = 1e-6
    slope = (an.zeta_laplace(alpha, lam) - 1.0) / lam
    assert slope == pytest.approx(-1 / alpha, rel=1e-4)


@pytest.mark.parametrize("alpha,lam", [(0.3, 1e-16), (0.5, 1e-10), (0.8, 1e-6), (1.0, 1e-6)])
def test_slope_at_zero_from_complement(alpha, lam):
    # the difference quotient is biased by about lam**alpha, so small alpha needs smaller lam
    slope = -an.zeta_laplace_complement(alpha, lam) / lam
    assert slope == pytest.approx(-1 / alpha, rel=1e-4)


def test_complement_matches():
    for alpha in (0.3, 0.7):
        for lam in (1e-3, 0.5, 4.0):
            assert an.zeta_laplace_complement(alpha, lam) == pytest.approx(
                1 - _laplace_oracle(alpha, lam), rel=1e-9)


def test_complete_monotonicity_on_grid():
    for alpha in (0.3, 0.5, 0.8, 1.0):
        lam = np.linspace(0.05, 5, 100)
        f = np.array([an.zeta_laplace(alpha, v) for v in lam])
        d1 = np.diff(f)
        d2 = np.diff(f, 2)
        assert np.all(d1 < 0) and np.all(d2 > 0)
        assert np.all((f > 0) & (f < 1))


def test_continued_fraction():
    for alpha in (0.3, 0.5, 0.8, 1.0):
        for lam in (0.5, 1.0, 2.0):
            f = an.zeta_laplace(alpha, lam)
            assert abs(an.continued_fraction_laplace(alpha, lam, 200) - f) <= 1e-10
            errs = [abs(an.continued_fraction_laplace(alpha, lam, d) - f) for d in (1, 2, 5, 10, 50)]
            assert all(e2 <= e1 for e1, e2 in zip(errs, errs[1:]))
    assert an.continued_fraction_laplace(1.0, 1.0, 500) == pytest.approx(0.5, abs=1e-14)
    # one level: F_0 = 1 / (2 - alpha + lam)
    assert an.continued_fraction_laplace(0.5, 1.0, 1) == pytest.approx(1 / 2.5)


def test_continued_fraction_is_cauchy():
    alpha, lam = 0.3, 0.5
    d = [abs(an.continued_fraction_laplace(alpha, lam, 2 * k) - an.continued_fraction_laplace(alpha, lam, k))
         for k in (5, 10, 20, 40)]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_laplace_monte_carlo(rng):
    x = absorption_times(RateSpec.qalpha(0.5), 1, 1_000_000, rng)
    est, se = empirical_laplace(x, [1.0])
    assert abs(est[0] - an.zeta_laplace(0.5, 1.0)) <= 4 * se[0]


def test_birth_death_hitting():
    assert an.birth_death_hitting_cdf(1, 1.0) == 0.5
    assert an.birth_death_hitting_cdf(2, 1.0) == 0.25
    assert an.birth_death_hitting_cdf(3, 1e12) == pytest.approx(1.0)
    u = np.array([0.1, 0.5, 0.9])
    t = an.birth_death_hitting_quantile(4, u)
    assert [an.birth_death_hitting_cdf(4, v) for v in t] == pytest.approx(u.tolist())


def test_exponents():
    assert an.levy_exponent(0.5, 1.0) == pytest.approx(math.exp(-1) / an.upper_incomplete_gamma(1.5, 1.0))
    assert an.levy_exponent(0.5, 1e-8) < 1e-7
    for alpha in (0.3, 0.5, 0.8):
        assert an.stable_exponent(alpha, 2.0) / an.stable_exponent(alpha, 1.0) == pytest.approx(2 ** (1 + alpha))
    assert an.stable_exponent(1.0, 3.0) == pytest.approx(4.5)
    assert an.scaled_exponent_gap(0.5, 1.0, 1e4) <= 1e-3
    gaps = [an.scaled_exponent_gap(0.5, 1.0, n) for n in (10, 100, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_levy_exponent_monte_carlo(rng):
    """exp(t phi(lam)) against the empirical transform of X_t, t=1, lam=1, alpha=0.5."""
    alpha, t, lam = 0.5, 1.0, 1.0
    J = rng.poisson(alpha * t, 1_000_000)
    z = absorption_times(RateSpec.qalpha(alpha), 1, int(J.sum()), rng)
    sums = np.zeros(J.size)
    np.add.at(sums, np.repeat(np.arange(J.size), J), z)
    est, se = empirical_laplace(sums - t, [lam])
    assert abs(est[0] - math.exp(t * an.levy_exponent(alpha, lam))) <= 4 * se[0]


def test_besq_absorption_law():
    assert an.besq_absorption_cdf(1.0, 0.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert an.besq_absorption_cdf(1.0, -1.0, 1e9) == pytest.approx(1.0, abs=1e-9)
    # shape (2 - delta)/2 = 1.5 for delta = -1
    ref = float(mp.gammainc(1.5, 0.5, mp.inf, regularized=True))
    assert an.besq_absorption_cdf(1.0, -1.0, 1.0) == pytest.approx(ref, rel=1e-12)
    t = np.geomspace(0.01, 100, 50)
    c = an.besq_absorption_cdf_array(2.0, -0.6, t)
    assert np.all(np.diff(c) > 0) and np.all((c >= 0) & (c <= 1))
    assert c[10] == pytest.approx(an.besq_absorption_cdf(2.0, -0.6, t[10]), rel=1e-12)


def test_levy_tail_limits():
    for s in (0.5, 1.0, 2.0):
        y = 1e-4
        val = y ** -1.5 * an.besq_absorption_tail(y, -1.0, s)
        assert val == pytest.approx(an.stable_levy_tail(0.5, s), rel=1e-3)
    for alpha in (0.3, 0.5, 0.8):
        h = 1e-4
        fd = (an.stable_levy_tail(alpha, 1 - h) - an.stable_levy_tail(alpha, 1 + h)) / (2 * h)
        assert fd == pytest.approx(an.stable_levy_density(alpha, 1.0), rel=1e-6)
        c = an.levy_measure_constant(alpha)
        assert an.stable_levy_tail(alpha, 0.7, normalized=True) == pytest.approx(c * an.stable_levy_tail(alpha, 0.7))


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
def test_exponent_reconstructed_from_levy_measure(alpha):
    for lam in (0.5, 1.0, 2.0):
        assert an.exponent_from_levy_measure(alpha, lam) == pytest.approx(an.stable_exponent(alpha, lam), rel=1e-6)


def test_conditional_tail_cdf():
    s = np.array([0.5, 1.0, 10.0])
    c = an.stable_tail_conditional_cdf(0.5, 0.5, s)
    assert c[0] == 0.0 and 0 < c[1] < c[2] < 1


def test_laplace_grid():
    g = an.LaplaceGrid.zeta(0.5, [0.5, 1.0, 2.0])
    assert np.all(np.diff(g.values) <= 0)
    with pytest.raises(ValueError):
        an.LaplaceGrid((0.5, 1.0), (0.3, 0.4))
