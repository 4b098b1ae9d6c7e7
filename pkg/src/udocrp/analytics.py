"""Closed-form laws and special functions.

Covers the incomplete gamma function, the Laplace transform of the Q_alpha
absorption time (closed form and continued fraction), Laplace exponents of
the Levy driver and of its stable limit, BESQ absorption laws and stable
Levy-measure tails.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

_EPS = 1e-16
_MAX_ITER = 100_000
_TINY = 1e-300


class DomainError(ValueError):
    pass


def _series_lower(a: float, z: float) -> float:
    """sum_k z^k / (a (a+1) ... (a+k)); lower gamma is e^-z z^a times this."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= z / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total
    raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, z={z})")


def _cf_upper(a: float, z: float) -> float:
    """Modified Lentz evaluation of e^z z^-a Gamma(a, z)."""
    b = z + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b if b != 0 else 1.0 / _TINY
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, z={z})")


def upper_gamma_scaled(a: float, z: float) -> float:
    """e^z z^-a Gamma(a, z), finite for large z where Gamma(a, z) underflows."""
    if a <= 0 or z <= 0:
        raise DomainError("need a > 0 and z > 0")
    if z < a + 1.0:
        lower = _series_lower(a, z)
        return math.exp(z + math.lgamma(a) - a * math.log(z)) - lower
    return _cf_upper(a, z)


def upper_incomplete_gamma(a: float, z: float) -> float:
    """Gamma(a, z) = int_z^inf e^-t t^(a-1) dt for a in (0, 3], z > 0."""
    if not (0 < a <= 3) or not z > 0:
        raise DomainError(f"upper incomplete gamma supported for a in (0, 3], z > 0; got a={a}, z={z}")
    if z < a + 1.0:
        return math.gamma(a) - math.exp(a * math.log(z) - z) * _series_lower(a, z)
    return math.exp(a * math.log(z) - z) * _cf_upper(a, z)


def regularized_upper_gamma(a: float, z: float) -> float:
    """Q(a, z) = Gamma(a, z) / Gamma(a); Q(a, 0) = 1."""
    if a <= 0:
        raise DomainError("need a > 0")
    if z <= 0:
        return 1.0
    if z < a + 1.0:
        return 1.0 - regularized_lower_gamma(a, z)
    return math.exp(a * math.log(z) - z - math.lgamma(a)) * _cf_upper(a, z)


def regularized_lower_gamma(a: float, z: float) -> float:
    """P(a, z) = 1 - Q(a, z), computed without cancellation for small z."""
    if a <= 0:
        raise DomainError("need a > 0")
    if z <= 0:
        return 0.0
    if z < a + 1.0:
        return math.exp(a * math.log(z) - z - math.lgamma(a)) * _series_lower(a, z)
    return 1.0 - regularized_upper_gamma(a, z)


# ---------------------------------------------------------------------------
# absorption time of the Q_alpha chain


def _check_alpha(alpha: float, open_right: bool = False):
    ok = 0 < alpha < 1 if open_right else 0 < alpha <= 1
    if not ok:
        rng = "(0, 1)" if open_right else "(0, 1]"
        raise DomainError(f"alpha must lie in {rng}, got {alpha}")


def _scaled_k(alpha: float, lam: float) -> float:
    return upper_gamma_scaled(1.0 + alpha, lam)


def zeta_laplace(alpha: float, lam: float) -> float:
    """E_1 exp(-lam * zeta) for the Q_alpha chain from 1, alpha in (0, 1]."""
    if alpha == 0:
        raise DomainError("alpha = 0 has no Laplace formula here; use birth_death_hitting_cdf")
    _check_alpha(alpha)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    return 1.0 - lam / alpha + 1.0 / (alpha * _scaled_k(alpha, lam))


def zeta_laplace_complement(alpha: float, lam: float) -> float:
    """1 - E_1 exp(-lam * zeta), free of cancellation as lam -> 0.

    Writes the complement as (lam/alpha) * (1 - r) with
    r = lam^a e^-lam / Gamma(1+a, lam), which is small for small lam.
    """
    _check_alpha(alpha)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    r = 1.0 / (lam * _scaled_k(alpha, lam))
    return lam / alpha * (1.0 - r)


def continued_fraction_laplace(alpha: float, lam: float, depth: int) -> float:
    """F_0 from the backward recursion F_r = (r+1)/(2r+2-alpha+lam-(r+1-alpha)F_{r+1}), F_depth = 0."""
    _check_alpha(alpha)
    if depth < 1:
        raise DomainError("depth must be at least 1")
    f = 0.0
    for r in range(depth - 1, -1, -1):
        f = (r + 1.0) / (2.0 * r + 2.0 - alpha + lam - (r + 1.0 - alpha) * f)
    return f


def birth_death_hitting_cdf(m: int, t: float) -> float:
    """P_m(zeta <= t) = (t/(t+1))^m for the alpha = 0 chain."""
    if m < 1:
        raise DomainError("m must be positive")
    if t <= 0:
        return 0.0
    if math.isinf(t):
        return 1.0
    return (t / (t + 1.0)) ** m


def birth_death_hitting_quantile(m: int, u):
    """Inverse of birth_death_hitting_cdf, vectorised over u in (0, 1)."""
    v = np.asarray(u, dtype=float) ** (1.0 / m)
    with np.errstate(divide="ignore"):
        return v / (1.0 - v)


# ---------------------------------------------------------------------------
# Laplace exponents


def levy_exponent(alpha: float, lam: float) -> float:
    """phi(lam) = lam^(1+a) e^-lam / Gamma(1+a, lam), so E exp(-lam X_t) = exp(t phi(lam))."""
    _check_alpha(alpha)
    if not lam > 0:
        raise DomainError("lambda must be positive")
    return 1.0 / _scaled_k(alpha, lam)


def stable_exponent(alpha: float, lam: float) -> float:
    """psi(lam) = lam^(1+a) / (2^a Gamma(1+a))."""
    if not 0 <= alpha <= 1:
        raise DomainError("alpha must lie in [0, 1]")
    return lam ** (1.0 + alpha) / (2.0**alpha * math.gamma(1.0 + alpha))


def scaled_levy_exponent(alpha: float, lam: float, n: float) -> float:
    """Exponent of X_{2n^(1+a) t} / 2n per unit t: 2 n^(1+a) phi(lam / 2n)."""
    return 2.0 * n ** (1.0 + alpha) * levy_exponent(alpha, lam / (2.0 * n))


def scaled_exponent_gap(alpha: float, lam: float, n: float) -> float:
    """Relative gap |2n^(1+a) phi(lam/2n) - psi(lam)| / psi(lam)."""
    psi = stable_exponent(alpha, lam)
    return abs(scaled_levy_exponent(alpha, lam, n) - psi) / psi


# ---------------------------------------------------------------------------
# squared Bessel absorption


def besq_absorption_cdf(z: float, delta: float, t: float) -> float:
    """P(zeta <= t) for BESQ_z(delta), delta < 2: zeta = z / 2G, G ~ Gamma((2-delta)/2)."""
    if not z > 0 or not delta < 2:
        raise DomainError("need z > 0 and delta < 2")
    if t <= 0:
        return 0.0
    if math.isinf(t):
        return 1.0
    return regularized_upper_gamma((2.0 - delta) / 2.0, z / (2.0 * t))


def besq_absorption_tail(z: float, delta: float, t: float) -> float:
    """P(zeta > t), accurate when it is tiny (small z)."""
    if not z > 0 or not delta < 2:
        raise DomainError("need z > 0 and delta < 2")
    if t <= 0:
        return 1.0
    return regularized_lower_gamma((2.0 - delta) / 2.0, z / (2.0 * t))


def besq_absorption_cdf_array(z: float, delta: float, t) -> np.ndarray:
    from scipy.special import gammaincc

    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        x = np.where(t > 0, z / (2.0 * np.where(t > 0, t, 1.0)), np.inf)
    return np.where(t > 0, gammaincc((2.0 - delta) / 2.0, x), 0.0)


# ---------------------------------------------------------------------------
# stable Levy measure


def levy_measure_constant(alpha: float) -> float:
    """c = 2a(1+a)/Gamma(1-a), relating the normalised and raw tails."""
    _check_alpha(alpha, open_right=True)
    return 2.0 * alpha * (1.0 + alpha) / math.gamma(1.0 - alpha)


def stable_levy_tail(alpha: float, s: float, normalized: bool = False) -> float:
    """Tail s^-(1+a) / (2^(1+a) Gamma(2+a)); times c when ``normalized``."""
    _check_alpha(alpha, open_right=True)
    if not s > 0:
        raise DomainError("s must be positive")
    v = s ** (-(1.0 + alpha)) / (2.0 ** (1.0 + alpha) * math.gamma(2.0 + alpha))
    return v * levy_measure_constant(alpha) if normalized else v


def stable_levy_density(alpha: float, s: float, normalized: bool = False) -> float:
    _check_alpha(alpha, open_right=True)
    v = s ** (-(2.0 + alpha)) / (2.0 ** (1.0 + alpha) * math.gamma(1.0 + alpha))
    return v * levy_measure_constant(alpha) if normalized else v


def stable_tail_conditional_cdf(alpha: float, eps: float, s) -> np.ndarray:
    """CDF of a jump size given it exceeds eps: 1 - (s/eps)^-(1+a) on [eps, inf)."""
    s = np.asarray(s, dtype=float)
    return np.where(s > eps, 1.0 - (s / eps) ** (-(1.0 + alpha)), 0.0)


def exponent_from_levy_measure(alpha: float, lam: float) -> float:
    """int (e^-lam s - 1 + lam s) Pi(ds) by quadrature; should equal psi(lam)."""
    c = levy_measure_constant(alpha)

    def f(s):
        x = lam * s
        # small-x series avoids cancellation in e^-x - 1 + x
        g = x * x / 2 - x**3 / 6 + x**4 / 24 if x < 1e-3 else math.expm1(-x) + x
        return g * stable_levy_density(alpha, s)

    pieces = [(0.0, 1.0 / lam), (1.0 / lam, 50.0 / lam), (50.0 / lam, np.inf)]
    total = sum(integrate.quad(f, a, b, limit=500, epsabs=0, epsrel=1e-12)[0] for a, b in pieces)
    return c * total


@dataclass(frozen=True)
class LaplaceGrid:
    lambdas: tuple
    values: tuple

    def __post_init__(self):
        if any(not l > 0 for l in self.lambdas):
            raise ValueError("lambda values must be positive")
        if any(not v > 0 for v in self.values):
            raise ValueError("Laplace transform values must be positive")
        pairs = sorted(zip(self.lambdas, self.values))
        if any(b[1] > a[1] + 1e-15 for a, b in zip(pairs, pairs[1:])):
            raise ValueError("Laplace transform must be nonincreasing in lambda")

    @classmethod
    def zeta(cls, alpha: float, lambdas) -> "LaplaceGrid":
        lambdas = tuple(float(l) for l in lambdas)
        return cls(lambdas, tuple(zeta_laplace(alpha, l) for l in lambdas))
