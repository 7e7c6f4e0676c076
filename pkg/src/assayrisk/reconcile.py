"""Pick the within-limit probability beta that an in-study rule implies, and
apply that same beta to capability and pre-study decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .capability import AcceptanceLimits, MethodProfile, is_capable, prob_within_limits
from .distributions import check_probability
from .errors import DomainError, LambdaMismatchError
from .mcoracle import components_content
from .runrules import RunRule, invert_oc, oc_accept_prob
from .tolerance import (
    PrestudyDecision,
    ToleranceInterval,
    ValidationDataset,
    VarianceComponents,
    beta_expectation_interval,
    estimate_components,
    prestudy_decision,
)

DEFAULT_TARGET = 0.90


def round_up(value: float, granularity: float) -> float:
    """Smallest multiple of ``granularity`` not below ``value`` (capped at 1)."""
    if not (math.isfinite(granularity) and granularity > 0.0):
        raise DomainError(f"granularity must be positive, got {granularity!r}")
    steps = math.ceil(value / granularity)
    digits = max(0, -math.floor(math.log10(granularity)) + 2)
    rounded = round(steps * granularity, digits)
    while rounded < value:
        steps += 1
        rounded = round(steps * granularity, digits)
    return min(rounded, 1.0)


def required_beta(rule: RunRule, target_run_accept: float, granularity: Optional[float] = None) -> float:
    """Per-sample probability needed for the rule to pass ``target_run_accept``
    of runs. Rounding, when requested, only ever goes up."""
    raw = invert_oc(rule, target_run_accept)
    return raw if granularity is None else round_up(raw, granularity)


@dataclass(frozen=True)
class ReconciliationReport:
    rule: RunRule
    target_run_accept: float
    raw_beta: float
    required_beta: float
    granularity: Optional[float]
    oc_at_raw_beta: float
    oc_at_required_beta: float
    limits: AcceptanceLimits
    profile: Optional[MethodProfile] = None
    prob_within: Optional[float] = None
    capability_verdict: Optional[bool] = None
    components: Optional[VarianceComponents] = None
    interval: Optional[ToleranceInterval] = None
    prestudy_verdict: Optional[PrestudyDecision] = None
    plugin_content: Optional[float] = None


def reconcile(
    rule: RunRule,
    target: float,
    limits: AcceptanceLimits,
    data: Union[MethodProfile, ValidationDataset, None] = None,
    *,
    granularity: Optional[float] = None,
    mode: str = "oneway",
) -> ReconciliationReport:
    if rule.lam != limits.lam:
        raise LambdaMismatchError(
            f"rule limit {rule.lam:g}% differs from acceptance limit {limits.lam:g}%"
        )
    raw = invert_oc(rule, target)
    beta = raw if granularity is None else round_up(raw, granularity)
    fields = dict(
        rule=rule,
        target_run_accept=float(target),
        raw_beta=raw,
        required_beta=beta,
        granularity=granularity,
        oc_at_raw_beta=oc_accept_prob(rule, raw),
        oc_at_required_beta=oc_accept_prob(rule, beta),
        limits=limits,
    )
    if isinstance(data, MethodProfile):
        prob = prob_within_limits(data, limits)
        fields.update(
            profile=data,
            prob_within=prob,
            capability_verdict=is_capable(data, limits, beta) if beta < 1.0 else prob >= 1.0,
        )
    elif isinstance(data, ValidationDataset):
        components = estimate_components(data)
        # a rounded beta of exactly 1 has no finite interval
        interval = beta_expectation_interval(components, min(beta, math.nextafter(1.0, 0.0)), mode)
        fields.update(
            components=components,
            interval=interval,
            prestudy_verdict=prestudy_decision(interval, limits),
            plugin_content=components_content(components, limits),
        )
    elif data is not None:
        raise TypeError(f"expected MethodProfile, ValidationDataset or None, got {type(data).__name__}")
    return ReconciliationReport(**fields)


@dataclass(frozen=True)
class ConsumerRiskRow:
    p: float
    accept_prob: float
    reject_prob: float


def consumer_risk_table(rule: RunRule, p_values: Sequence[float]) -> list[ConsumerRiskRow]:
    """Run acceptance and rejection rates at each per-sample probability."""
    rows = []
    for p in p_values:
        p = check_probability(p)
        accept = oc_accept_prob(rule, p)
        rows.append(ConsumerRiskRow(p, accept, 1.0 - accept))
    return rows
