"""Special functions and the few distributions the rest of the package needs.

Only the standard library is used here. The normal CDF is built on
``math.erfc`` (correctly rounded to within a few ulp on all supported
platforms), the normal quantile on ``statistics.NormalDist.inv_cdf``
(Wichura's AS241, relative accuracy about 1e-16). The Student t quantile is
obtained by inverting the regularized incomplete beta function, and binomial
tails are summed term by term with log-domain coefficients.
"""

from __future__ import annotations

import math
from statistics import NormalDist

from .errors import DomainError

_SQRT2 = math.sqrt(2.0)
_STD_NORMAL = NormalDist()

_BETACF_EPS = 1e-16
_BETACF_TINY = 1e-300
_BETACF_MAXITER = 100_000


def check_probability(p: float, name: str = "p", *, open_interval: bool = False) -> float:
    """Validate a probability and return it as a float."""
    p = float(p)
    if not math.isfinite(p):
        raise DomainError(f"{name} must be finite, got {p!r}")
    if open_interval:
        if not 0.0 < p < 1.0:
            raise DomainError(f"{name} must lie strictly between 0 and 1, got {p!r}")
    elif not 0.0 <= p <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")
    return p


def normal_cdf(z: float) -> float:
    """Standard normal CDF, Phi(z)."""
    z = float(z)
    if not math.isfinite(z):
        raise DomainError(f"normal_cdf needs a finite argument, got {z!r}")
    return 0.5 * math.erfc(-z / _SQRT2)


def normal_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf`. ``p`` must be strictly inside (0, 1)."""
    p = check_probability(p, open_interval=True)
    return _STD_NORMAL.inv_cdf(p)


def _betacf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for I_x(a, b).
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_TINY:
        d = _BETACF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= _BETACF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _stirling_correction(x: float) -> float:
    # lgamma(x) - [(x - 0.5) log x - x + 0.5 log(2 pi)], valid for large x
    x2 = x * x
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * x2)) / x2) / x2) / x


def log_beta(a: float, b: float) -> float:
    """log B(a, b), accurate when one argument is very large."""
    small, big = min(a, b), max(a, b)
    if big < 10.0:
        return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    # lgamma(big + small) - lgamma(big) without cancelling two huge numbers
    log_ratio = (
        (big - 0.5) * math.log1p(small / big)
        + small * math.log(big + small)
        - small
        + _stirling_correction(big + small)
        - _stirling_correction(big)
    )
    return math.lgamma(small) - log_ratio


def regularized_beta(x: float, a: float, b: float, *, y: float | None = None) -> float:
    """Regularized incomplete beta function I_x(a, b).

    ``y`` may carry ``1 - x`` computed without cancellation by the caller;
    it is used for the logarithm of the complement and for the symmetric
    branch of the continued fraction.
    """
    if a <= 0 or b <= 0:
        raise DomainError(f"shape parameters must be positive, got a={a}, b={b}")
    if y is None:
        y = 1.0 - x
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise DomainError(f"x must lie in [0, 1], got {x!r}")
    if x == 0.0:
        return 0.0
    if y == 0.0:
        return 1.0
    log_x = math.log1p(-y) if y < 0.5 else math.log(x)
    log_y = math.log1p(-x) if x < 0.5 else math.log(y)
    log_front = a * log_x + b * log_y - log_beta(a, b)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, y) / b


def _t_upper_tail(t: float, nu: float) -> float:
    """P(T > t) for t >= 0."""
    t2 = t * t
    x = nu / (nu + t2)
    y = t2 / (nu + t2)
    return 0.5 * regularized_beta(x, 0.5 * nu, 0.5, y=y)


def t_cdf(t: float, nu: float) -> float:
    nu = _check_dof(nu)
    t = float(t)
    if not math.isfinite(t):
        raise DomainError(f"t_cdf needs a finite argument, got {t!r}")
    if t >= 0.0:
        return 1.0 - _t_upper_tail(t, nu)
    return _t_upper_tail(-t, nu)


def t_pdf(t: float, nu: float) -> float:
    log_norm = -0.5 * math.log(nu) - log_beta(0.5 * nu, 0.5)
    return math.exp(log_norm - 0.5 * (nu + 1.0) * math.log1p(t * t / nu))


def _check_dof(nu: float) -> float:
    nu = float(nu)
    if not (nu > 0.0) or math.isnan(nu):
        raise DomainError(f"degrees of freedom must be positive, got {nu!r}")
    if math.isinf(nu):
        raise DomainError("degrees of freedom must be finite")
    return nu


def _t_initial_guess(z: float, nu: float) -> float:
    # Cornish-Fisher expansion around the normal quantile; only a starting point.
    z2 = z * z
    g1 = (z2 + 1.0) * z / 4.0
    g2 = ((5.0 * z2 + 16.0) * z2 + 3.0) * z / 96.0
    g3 = (((3.0 * z2 + 19.0) * z2 + 17.0) * z2 - 15.0) * z / 384.0
    guess = z + g1 / nu + g2 / nu**2 + g3 / nu**3
    return guess if guess > 0.0 and math.isfinite(guess) else z


def t_quantile(p: float, nu: float) -> float:
    """Student t quantile for (possibly fractional) degrees of freedom ``nu``.

    The CDF is evaluated through the regularized incomplete beta function and
    inverted with a Newton iteration that is kept inside a bracketing interval;
    any step leaving the bracket is replaced by bisection.
    """
    p = check_probability(p, open_interval=True)
    nu = _check_dof(nu)
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, nu)
    upper = 1.0 - p

    def excess(t: float) -> float:
        # positive when t is below the quantile
        return _t_upper_tail(t, nu) - upper

    lo, hi = 0.0, math.inf
    t = max(_t_initial_guess(normal_quantile(p), nu), 1e-8)
    for _ in range(500):
        f = excess(t)
        if f == 0.0:
            return t
        if f > 0.0:
            lo = t
        else:
            hi = t
        step = f / t_pdf(t, nu)
        candidate = t + step
        # Newton converges quadratically: a step this small leaves an error
        # far below rounding level
        if abs(step) <= 1e-12 * max(1.0, t):
            return candidate
        if not (lo < candidate < hi):
            candidate = 2.0 * lo if math.isinf(hi) else 0.5 * (lo + hi)
        if hi - lo <= 4e-16 * max(1.0, lo):
            return candidate
        t = candidate
    raise ArithmeticError(f"t quantile did not converge (p={p}, nu={nu})")


def _log_binom_coef(m: int, j: int) -> float:
    return math.lgamma(m + 1) - math.lgamma(j + 1) - math.lgamma(m - j + 1)


_EXACT_COEF_MAX_M = 30


def binom_pmf(j: int, m: int, p: float) -> float:
    if p == 0.0:
        return 1.0 if j == 0 else 0.0
    if p == 1.0:
        return 1.0 if j == m else 0.0
    if m <= _EXACT_COEF_MAX_M:
        # integer coefficients keep small-m tails exact for dyadic p
        return math.comb(m, j) * p**j * (1.0 - p) ** (m - j)
    return math.exp(_log_binom_coef(m, j) + j * math.log(p) + (m - j) * math.log1p(-p))


def binom_tail_geq(k: int, m: int, p: float) -> float:
    """P(Y >= k) for Y ~ Binomial(m, p).

    Both tails are summed directly; the smaller one is used, so a result
    near one never comes from a difference of nearly equal numbers.
    """
    if isinstance(k, bool) or isinstance(m, bool) or int(k) != k or int(m) != m:
        raise DomainError("k and m must be integers")
    k, m = int(k), int(m)
    if m < 1:
        raise DomainError(f"m must be at least 1, got {m}")
    if not 0 <= k <= m:
        raise DomainError(f"k must satisfy 0 <= k <= m, got k={k}, m={m}")
    p = check_probability(p)
    if k == 0:
        return 1.0
    upper = math.fsum(binom_pmf(j, m, p) for j in range(k, m + 1))
    if upper <= 0.5:
        return upper
    lower = math.fsum(binom_pmf(j, m, p) for j in range(0, k))
    return 1.0 - lower
