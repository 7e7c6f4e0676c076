"""Pre-study validation: variance components, beta-expectation tolerance
intervals and the inclusion decision against the acceptance limits.

Datasets are balanced one-way layouts (``n_series`` runs with ``n_reps``
replicates each) of relative errors in percent, one nominal level at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .capability import AcceptanceLimits, relative_error_pct
from .distributions import check_probability, t_quantile
from .errors import (
    DegenerateVarianceError,
    DesignError,
    DomainError,
    UnbalancedDesignError,
)

Mode = Literal["simple", "oneway"]
MODES = ("simple", "oneway")


@dataclass(frozen=True)
class ValidationDesign:
    n_series: int
    n_reps: int
    level: float = 1.0

    def __post_init__(self):
        if self.n_series < 2:
            raise DesignError(f"n_series >= 2 required, got {self.n_series}")
        if self.n_reps < 1:
            raise DesignError(f"n_reps >= 1 required, got {self.n_reps}")
        if not (math.isfinite(self.level) and self.level > 0):
            raise DomainError(f"level must be positive, got {self.level!r}")

    @property
    def n_total(self) -> int:
        return self.n_series * self.n_reps


@dataclass(frozen=True)
class ValidationDataset:
    """Relative errors of one level, stored as an ``(n_series, n_reps)`` matrix.

    ``series_ids`` keeps the first-seen order of the series labels.
    """

    design: ValidationDesign
    values: np.ndarray = field(repr=False)
    series_ids: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.design.n_series, self.design.n_reps):
            raise UnbalancedDesignError(
                f"values have shape {values.shape}, design expects "
                f"({self.design.n_series}, {self.design.n_reps})"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("relative errors must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if not self.series_ids:
            ids = tuple(str(i + 1) for i in range(self.design.n_series))
            object.__setattr__(self, "series_ids", ids)

    @classmethod
    def from_matrix(cls, rows: Sequence[Sequence[float]], level: float = 1.0) -> "ValidationDataset":
        """Build from one row of relative errors per series."""
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise UnbalancedDesignError(f"series have differing replicate counts {sorted(lengths)}")
        n_reps = lengths.pop() if lengths else 0
        design = ValidationDesign(len(rows), n_reps, level)
        return cls(design, np.asarray(rows, dtype=float))

    @classmethod
    def from_records(
        cls,
        records: Iterable[tuple[str, int, float]],
        level: float = 1.0,
    ) -> "ValidationDataset":
        """Build from ``(series_id, replicate_id, relative_error)`` triples."""
        by_series: dict[str, dict[int, float]] = {}
        for series_id, rep, value in records:
            reps = by_series.setdefault(str(series_id), {})
            if rep in reps:
                raise UnbalancedDesignError(f"duplicate replicate {rep} in series {series_id!r}")
            reps[rep] = float(value)
        if len(by_series) < 2:
            raise DesignError(f"n_series >= 2 required, got {len(by_series)}")
        counts = {len(r) for r in by_series.values()}
        if len(counts) != 1:
            raise UnbalancedDesignError(
                "unbalanced design: replicate counts per series are "
                + ", ".join(f"{s}={len(r)}" for s, r in by_series.items())
            )
        rows = [[reps[k] for k in sorted(reps)] for reps in by_series.values()]
        design = ValidationDesign(len(rows), counts.pop(), level)
        return cls(design, np.asarray(rows, dtype=float), tuple(by_series))

    @classmethod
    def from_pairs(
        cls,
        records: Iterable[tuple[str, int, float, float]],
        level: float | None = None,
    ) -> "ValidationDataset":
        """Build from ``(series_id, replicate_id, nominal, measured)`` records."""
        records = list(records)
        converted = [(s, r, relative_error_pct(nom, meas)) for s, r, nom, meas in records]
        if level is None:
            level = records[0][2] if records else 1.0
        return cls.from_records(converted, level)


@dataclass(frozen=True)
class VarianceComponents:
    bias_hat: float
    var_between: float
    var_within: float
    var_ip: float
    ms_between: float
    ms_within: float
    design: ValidationDesign
    # sample variance of all observations pooled, (SS_total)/(N - 1)
    var_total: float = float("nan")

    def __post_init__(self):
        if not self.var_within > 0.0:
            raise DegenerateVarianceError(
                "within-series variance is zero; check the data for quantization or copied values"
            )
        if self.var_between < 0.0:
            raise DomainError("between-series variance cannot be negative")

    @property
    def sigma_ip(self) -> float:
        return math.sqrt(self.var_ip)

    @property
    def variance_ratio(self) -> float:
        return self.var_between / self.var_within


@dataclass(frozen=True)
class ToleranceInterval:
    lower: float
    upper: float
    k_factor: float
    dof: float
    beta: float
    center: float
    sigma: float
    mode: str


@dataclass(frozen=True)
class PrestudyDecision:
    accepted: bool
    margin_lower: float
    margin_upper: float
    # acceptance guarantees the expected proportion; rejection proves nothing
    one_sided_guarantee: bool = True


def anova_batch(values: np.ndarray) -> dict[str, np.ndarray]:
    """One-way ANOVA on the last two axes of ``values`` (series, replicate).

    Vectorized over any leading axes so that simulations can process many
    datasets at once.
    """
    values = np.asarray(values, dtype=float)
    p, n = values.shape[-2], values.shape[-1]
    series_means = values.mean(axis=-1)
    grand = series_means.mean(axis=-1)
    ss_within = ((values - series_means[..., None]) ** 2).sum(axis=(-2, -1))
    ss_between = n * ((series_means - grand[..., None]) ** 2).sum(axis=-1)
    ms_within = ss_within / (p * (n - 1)) if n > 1 else np.full_like(ss_within, np.nan)
    ms_between = ss_between / (p - 1)
    var_between = np.maximum(0.0, (ms_between - ms_within) / n)
    return {
        "grand_mean": grand,
        "ss_within": ss_within,
        "ss_between": ss_between,
        "ms_within": ms_within,
        "ms_between": ms_between,
        "var_between": var_between,
        "var_within": ms_within,
        "var_ip": var_between + ms_within,
        "var_total": (ss_within + ss_between) / (p * n - 1),
    }


def estimate_components(data: ValidationDataset) -> VarianceComponents:
    """Method-of-moments variance components for a balanced one-way layout.

    A negative between-series estimate is truncated to zero.
    """
    design = data.design
    if design.n_reps < 2:
        raise DesignError("n_reps >= 2 required: within-series variance is not identifiable")
    a = anova_batch(data.values)
    return VarianceComponents(
        bias_hat=float(a["grand_mean"]),
        var_between=float(a["var_between"]),
        var_within=float(a["var_within"]),
        var_ip=float(a["var_ip"]),
        ms_between=float(a["ms_between"]),
        ms_within=float(a["ms_within"]),
        design=design,
        var_total=float(a["var_total"]),
    )


def k_factor_simple(n: int, beta: float) -> tuple[float, float]:
    """k and degrees of freedom for n i.i.d. normal observations."""
    if int(n) != n or n < 2:
        raise DesignError(f"n >= 2 required, got {n}")
    beta = check_probability(beta, "beta", open_interval=True)
    dof = float(n - 1)
    k = t_quantile(0.5 * (1.0 + beta), dof) * math.sqrt(1.0 + 1.0 / n)
    return k, dof


def satterthwaite_dof(ratio: float, n_series: int, n_reps: int) -> float:
    """Approximate degrees of freedom of sigma_B^2 + sigma_W^2 at ``ratio``
    = sigma_B^2 / sigma_W^2."""
    p, n = n_series, n_reps
    denom = (ratio + 1.0 / n) ** 2 / (p - 1) + (1.0 - 1.0 / n) / (p * n)
    return (ratio + 1.0) ** 2 / denom


def oneway_k_from_ratio(ratio: float, n_series: int, n_reps: int, beta: float) -> tuple[float, float]:
    p, n = n_series, n_reps
    b_sq = (ratio + 1.0) / (n * ratio + 1.0)
    dof = satterthwaite_dof(ratio, p, n)
    k = t_quantile(0.5 * (1.0 + beta), dof) * math.sqrt(1.0 + 1.0 / (p * n * b_sq))
    return k, dof


def k_factor_oneway(components: VarianceComponents, beta: float) -> tuple[float, float]:
    """k and Satterthwaite degrees of freedom for the balanced random model.

    The prediction variance of a new observation around the grand mean is
    sigma_IP^2 * (1 + 1/(N B^2)) with B^2 = (R + 1)/(n R + 1), N = p n and
    R the variance ratio, all evaluated at the estimates.
    """
    design = components.design
    if design.n_reps < 2:
        raise DesignError("n_reps >= 2 required for the one-way random model")
    if not components.var_within > 0.0:
        raise DegenerateVarianceError("within-series variance is zero")
    beta = check_probability(beta, "beta", open_interval=True)
    return oneway_k_from_ratio(components.variance_ratio, design.n_series, design.n_reps, beta)


def beta_expectation_interval(
    components: VarianceComponents, beta: float, mode: Mode = "oneway"
) -> ToleranceInterval:
    """Interval centered on the bias estimate whose expected content is ``beta``.

    ``oneway`` uses the intermediate precision sqrt(sigma_B^2 + sigma_W^2)
    with the random-model k. ``simple`` treats all N observations as i.i.d.:
    the pooled sample standard deviation with N - 1 degrees of freedom.
    """
    beta = check_probability(beta, "beta", open_interval=True)
    if mode == "oneway":
        sigma = components.sigma_ip
        k, dof = k_factor_oneway(components, beta)
    elif mode == "simple":
        sigma = math.sqrt(components.var_total)
        k, dof = k_factor_simple(components.design.n_total, beta)
    else:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    if not sigma > 0.0:
        raise DegenerateVarianceError("estimated precision is zero")
    half = k * sigma
    return ToleranceInterval(
        lower=components.bias_hat - half,
        upper=components.bias_hat + half,
        k_factor=k,
        dof=dof,
        beta=beta,
        center=components.bias_hat,
        sigma=sigma,
        mode=mode,
    )


def prestudy_decision(interval: ToleranceInterval, limits: AcceptanceLimits) -> PrestudyDecision:
    """Accept when the interval lies strictly inside (-lambda, +lambda)."""
    margin_lower = interval.lower + limits.lam
    margin_upper = limits.lam - interval.upper
    return PrestudyDecision(
        accepted=interval.lower > -limits.lam and interval.upper < limits.lam,
        margin_lower=margin_lower,
        margin_upper=margin_upper,
    )
