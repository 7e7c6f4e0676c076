"""Method capability: the chance that one measurement lands within +/- lambda.

Everything is expressed as relative error in percent of the nominal value.
A method with true bias ``bias_mu`` and true precision ``sigma_m`` produces
relative errors distributed N(bias_mu, sigma_m**2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .distributions import check_probability, normal_cdf, normal_quantile
from .errors import DomainError
from .rootfind import bisect_increasing


@dataclass(frozen=True)
class AcceptanceLimits:
    """Symmetric limits [-lam, +lam] on the relative error, in percent."""

    lam: float

    def __post_init__(self):
        lam = float(self.lam)
        if not (math.isfinite(lam) and lam > 0.0):
            raise DomainError(f"acceptance limit must be a positive finite number, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)

    def contains(self, rel_error: float) -> bool:
        """Strict containment ``|x - mu_T| < lam``."""
        return abs(rel_error) < self.lam


@dataclass(frozen=True)
class MethodProfile:
    bias_mu: float
    sigma_m: float

    def __post_init__(self):
        bias, sigma = float(self.bias_mu), float(self.sigma_m)
        if not math.isfinite(bias):
            raise DomainError(f"bias must be finite, got {self.bias_mu!r}")
        if not (math.isfinite(sigma) and sigma >= 0.0):
            raise DomainError(f"sigma must be finite and non-negative, got {self.sigma_m!r}")
        object.__setattr__(self, "bias_mu", bias)
        object.__setattr__(self, "sigma_m", sigma)


def relative_error_pct(nominal: float, measured: float) -> float:
    if not (math.isfinite(nominal) and nominal > 0.0):
        raise DomainError(f"nominal value must be positive, got {nominal!r}")
    if not math.isfinite(measured):
        raise DomainError(f"measured value must be finite, got {measured!r}")
    return 100.0 * (measured - nominal) / nominal


@dataclass(frozen=True)
class Measurement:
    nominal: float
    measured: float
    relative_error: float

    @classmethod
    def from_pair(cls, nominal: float, measured: float) -> "Measurement":
        return cls(float(nominal), float(measured), relative_error_pct(nominal, measured))


def prob_within_limits(profile: MethodProfile, limits: AcceptanceLimits) -> float:
    """P(|x - mu_T| < lambda) for normally distributed relative errors."""
    bias = abs(profile.bias_mu)
    lam = limits.lam
    if profile.sigma_m == 0.0:
        if bias < lam:
            return 1.0
        return 0.5 if bias == lam else 0.0
    # tiny sigmas overflow to inf; the CDF is flat far out anyway
    upper = max(-1e300, min(1e300, (lam - bias) / profile.sigma_m))
    lower = max(-1e300, (-lam - bias) / profile.sigma_m)
    if upper > 0.0:
        # complement form keeps precision when the result is close to one
        prob = 1.0 - normal_cdf(-upper) - normal_cdf(lower)
    else:
        prob = normal_cdf(upper) - normal_cdf(lower)
    return min(1.0, max(0.0, prob))


def is_capable(profile: MethodProfile, limits: AcceptanceLimits, beta: float) -> bool:
    """True when the method meets ``beta``; a tie counts as capable."""
    beta = check_probability(beta, "beta", open_interval=True)
    return prob_within_limits(profile, limits) >= beta


def region_boundary_sigma(bias_mu: float, limits: AcceptanceLimits, beta: float) -> Optional[float]:
    """Largest precision that still reaches ``beta`` at the given bias.

    Returns ``None`` when ``|bias_mu| >= lambda``: there the probability can
    never exceed one half, and the region is not defined for such biases.
    """
    beta = check_probability(beta, "beta", open_interval=True)
    bias = float(bias_mu)
    if not math.isfinite(bias):
        raise DomainError(f"bias must be finite, got {bias_mu!r}")
    if abs(bias) >= limits.lam:
        return None

    def shortfall(sigma: float) -> float:
        # non-decreasing in sigma, zero at the boundary
        return beta - prob_within_limits(MethodProfile(bias, sigma), limits)

    hi = limits.lam
    while shortfall(hi) < 0.0:
        hi *= 2.0
    lo = 0.0
    lo, hi = bisect_increasing(shortfall, lo, hi, xtol=1e-14 * limits.lam)
    # both ends are within rounding of the root; report the midpoint
    return 0.5 * (lo + hi)


def closed_form_sigma_at_zero_bias(limits: AcceptanceLimits, beta: float) -> float:
    return limits.lam / normal_quantile(0.5 * (1.0 + beta))


def region_curve(
    limits: AcceptanceLimits, beta: float, bias_grid: Iterable[float]
) -> list[tuple[float, Optional[float]]]:
    return [(float(b), region_boundary_sigma(b, limits, beta)) for b in bias_grid]
