"""Risk-based decision rules for analytical methods.

Capability of a method under acceptance limits, beta-expectation tolerance
intervals for pre-study validation, operating characteristics of k-of-m-lambda
run rules, and the binomial inversion linking the two phases.
"""

__version__ = "0.1.0"

from .capability import (
    AcceptanceLimits,
    Measurement,
    MethodProfile,
    is_capable,
    prob_within_limits,
    region_boundary_sigma,
    region_curve,
)
from .distributions import binom_tail_geq, normal_cdf, normal_quantile, t_quantile
from .errors import AssayRiskError
from .reconcile import consumer_risk_table, reconcile, required_beta
from .runrules import RunRule, invert_oc, oc_accept_prob, oc_curve, parse_rule
from .tolerance import (
    ValidationDataset,
    ValidationDesign,
    VarianceComponents,
    beta_expectation_interval,
    estimate_components,
    k_factor_oneway,
    k_factor_simple,
    prestudy_decision,
)

__all__ = [
    "AcceptanceLimits",
    "AssayRiskError",
    "Measurement",
    "MethodProfile",
    "RunRule",
    "ValidationDataset",
    "ValidationDesign",
    "VarianceComponents",
    "beta_expectation_interval",
    "binom_tail_geq",
    "consumer_risk_table",
    "estimate_components",
    "invert_oc",
    "is_capable",
    "k_factor_oneway",
    "k_factor_simple",
    "normal_cdf",
    "normal_quantile",
    "oc_accept_prob",
    "oc_curve",
    "parse_rule",
    "prestudy_decision",
    "prob_within_limits",
    "reconcile",
    "region_boundary_sigma",
    "region_curve",
    "required_beta",
    "t_quantile",
]
