"""Monte Carlo counterparts of the analytic quantities.

Random numbers come from numpy's Philox4x64 counter-based generator; normal
variates use numpy's ziggurat sampler. Each simulation is cut into fixed-size
chunks and chunk ``i`` of stream ``s`` is keyed by
``SeedSequence(seed, spawn_key=(s, i))``. Chunks may run on any number of
worker threads; partial results are always combined in chunk order, so the
output is bit-for-bit identical whatever the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np
from scipy.special import ndtr

from .capability import AcceptanceLimits, MethodProfile, prob_within_limits
from .distributions import check_probability, normal_quantile
from .errors import DegenerateVarianceError, DomainError
from .runrules import RunRule
from .tolerance import (
    MODES,
    ValidationDesign,
    VarianceComponents,
    anova_batch,
    k_factor_simple,
    oneway_k_from_ratio,
)

CHUNK_DRAWS = 1 << 16
AGREEMENT_SE = 4.0

T = TypeVar("T")


@dataclass(frozen=True)
class SimulationSpec:
    bias: float = 0.0
    sigma_b: float = 0.0
    sigma_w: float = 0.0
    n_draws: int = 100_000
    seed: int = 0
    stream_id: int = 0
    design: Optional[ValidationDesign] = None

    def __post_init__(self):
        if self.n_draws < 1:
            raise DomainError(f"n_draws must be at least 1, got {self.n_draws}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.stream_id < 0:
            raise DomainError("stream_id must be non-negative")
        if self.sigma_b < 0 or self.sigma_w < 0:
            raise DomainError("standard deviations must be non-negative")

    @property
    def sigma_total(self) -> float:
        return math.hypot(self.sigma_b, self.sigma_w)


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    n: int

    def z_score(self, analytic: float) -> float:
        diff = self.value - analytic
        if self.se == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.se

    def agrees_with(self, analytic: float, n_se: float = AGREEMENT_SE) -> bool:
        return abs(self.z_score(analytic)) <= n_se


@dataclass(frozen=True)
class CoverageResult:
    mean_content: float
    se: float
    n_sim: int
    n_used: int
    n_degenerate: int


def generator(seed: int, stream_id: int, chunk: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(seed, spawn_key=(stream_id, chunk))
    return np.random.Generator(np.random.Philox(seq))


def _chunk_sizes(total: int, per_chunk: int) -> list[int]:
    full, rest = divmod(total, per_chunk)
    return [per_chunk] * full + ([rest] if rest else [])


def _run_chunks(
    work: Callable[[np.random.Generator, int], T],
    total: int,
    per_chunk: int,
    seed: int,
    stream_id: int,
    workers: int = 1,
) -> list[T]:
    sizes = _chunk_sizes(total, per_chunk)
    jobs = [(generator(seed, stream_id, i), size) for i, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [work(g, size) for g, size in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: work(*job), jobs))


def _draw_datasets(rng: np.random.Generator, size: int, p: int, n: int, spec: SimulationSpec) -> np.ndarray:
    """``(size, p, n)`` relative errors: bias + series effect + replicate error."""
    out = np.full((size, p, n), spec.bias, dtype=float)
    # both blocks are drawn even for a zero sigma so streams stay aligned
    u = rng.standard_normal((size, p, 1))
    e = rng.standard_normal((size, p, n))
    out += spec.sigma_b * u
    out += spec.sigma_w * e
    return out


def _draw_series(rng: np.random.Generator, n_series: int, n_reps: int, spec: SimulationSpec) -> np.ndarray:
    return _draw_datasets(rng, 1, n_series, n_reps, spec)[0]


def simulate_measurements(spec: SimulationSpec, workers: int = 1) -> np.ndarray:
    """``n_draws`` relative errors; consecutive groups of ``design.n_reps``
    draws share one series effect (each draw is its own series without a design)."""
    reps = spec.design.n_reps if spec.design is not None else 1
    n_series = -(-spec.n_draws // reps)
    per_chunk = max(1, CHUNK_DRAWS // reps)
    parts = _run_chunks(
        lambda rng, size: _draw_series(rng, size, reps, spec).ravel(),
        n_series, per_chunk, spec.seed, spec.stream_id, workers,
    )
    return np.concatenate(parts)[: spec.n_draws]


def _proportion(successes: int, n: int) -> Estimate:
    p_hat = successes / n
    return Estimate(p_hat, math.sqrt(p_hat * (1.0 - p_hat) / n), n)


def empirical_prob_within(spec: SimulationSpec, limits: AcceptanceLimits, workers: int = 1) -> Estimate:
    """Fraction of simulated relative errors strictly inside the limits."""
    lam = limits.lam

    def count(rng, size):
        x = _draw_series(rng, size, 1, spec)
        return int(np.count_nonzero(np.abs(x) < lam))

    counts = _run_chunks(count, spec.n_draws, CHUNK_DRAWS, spec.seed, spec.stream_id, workers)
    return _proportion(sum(counts), spec.n_draws)


def accepted_runs(rule: RunRule, within: np.ndarray) -> np.ndarray:
    """Vectorized rule decision for a ``(runs, m)`` boolean matrix."""
    ok = within.sum(axis=1) >= rule.k_min
    if rule.constrained:
        start = 0
        for size in rule.layout:
            ok &= within[:, start:start + size].any(axis=1)
            start += size
    return ok


def empirical_run_accept(rule: RunRule, spec: SimulationSpec, workers: int = 1) -> Estimate:
    """Acceptance rate over ``n_draws`` simulated runs of ``rule.m`` QC samples.

    All samples of one run share the run's series effect, so with
    ``sigma_b > 0`` samples are correlated and the binomial OC no longer applies.
    """
    lam = rule.lam
    per_chunk = max(1, CHUNK_DRAWS // rule.m)

    def count(rng, size):
        x = _draw_series(rng, size, rule.m, spec)
        return int(np.count_nonzero(accepted_runs(rule, np.abs(x) < lam)))

    counts = _run_chunks(count, spec.n_draws, per_chunk, spec.seed, spec.stream_id, workers)
    return _proportion(sum(counts), spec.n_draws)


def sigma_for_prob(p: float, lam: float) -> float:
    """Precision of an unbiased method whose within-limit probability is ``p``."""
    p = check_probability(p)
    if p == 1.0:
        return 0.0
    if p == 0.0:
        return math.inf
    return lam / normal_quantile(0.5 * (1.0 + p))


def ti_coverage_experiment(
    bias: float,
    sigma_b: float,
    sigma_w: float,
    design: ValidationDesign,
    beta: float,
    mode: str,
    n_sim: int,
    seed: int = 0,
    stream_id: int = 0,
    workers: int = 1,
) -> CoverageResult:
    """Mean true content of beta-expectation intervals over simulated datasets.

    Each dataset is drawn from the true one-way model, its interval built
    with the production k recipe, and the interval's content evaluated
    exactly under the true N(bias, sigma_b^2 + sigma_w^2). Datasets with a
    degenerate variance estimate are counted and left out of the mean.
    """
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    beta = check_probability(beta, "beta", open_interval=True)
    if design.n_reps < 2:
        raise DomainError("coverage experiments need n_reps >= 2")
    spec = SimulationSpec(bias, sigma_b, sigma_w, n_draws=n_sim, seed=seed, stream_id=stream_id)
    p, n = design.n_series, design.n_reps
    sigma_true = spec.sigma_total
    if sigma_true == 0.0:
        raise DegenerateVarianceError("true total variance is zero")
    per_chunk = max(1, CHUNK_DRAWS // (p * n))
    k_simple = k_factor_simple(p * n, beta)[0] if mode == "simple" else None

    def work(rng, size):
        values = _draw_datasets(rng, size, p, n, spec)
        a = anova_batch(values)
        if mode == "simple":
            sigma_hat = np.sqrt(a["var_total"])
            ok = sigma_hat > 0.0
            k = np.full(size, k_simple)
        else:
            sigma_hat = np.sqrt(a["var_ip"])
            ok = a["var_within"] > 0.0
            k = np.full(size, np.nan)
            for i in np.flatnonzero(ok):
                ratio = a["var_between"][i] / a["var_within"][i]
                k[i] = oneway_k_from_ratio(float(ratio), p, n, beta)[0]
        center = a["grand_mean"][ok]
        half = k[ok] * sigma_hat[ok]
        content = ndtr((center + half - bias) / sigma_true) - ndtr((center - half - bias) / sigma_true)
        return math.fsum(content), math.fsum(content * content), int(ok.sum()), int(size - ok.sum())

    parts = _run_chunks(work, n_sim, per_chunk, seed, stream_id, workers)
    total = sum_sq = 0.0
    used = degenerate = 0
    for s, s2, u, d in parts:
        total += s
        sum_sq += s2
        used += u
        degenerate += d
    if used == 0:
        raise DegenerateVarianceError("every simulated dataset had a degenerate variance estimate")
    mean = total / used
    var = max(0.0, sum_sq / used - mean * mean) * used / max(used - 1, 1)
    return CoverageResult(mean, math.sqrt(var / used), n_sim, used, degenerate)


def plugin_expected_content(bias_hat: float, sigma_hat: float, limits: AcceptanceLimits) -> float:
    """Plug-in proportion within limits from one dataset's estimates."""
    if not sigma_hat > 0.0:
        raise DegenerateVarianceError("estimated precision is zero")
    return prob_within_limits(MethodProfile(bias_hat, sigma_hat), limits)


def components_content(components: VarianceComponents, limits: AcceptanceLimits) -> float:
    return plugin_expected_content(components.bias_hat, components.sigma_ip, limits)


def plugin_expected_content_mc(
    bias: float,
    sigma_b: float,
    sigma_w: float,
    design: ValidationDesign,
    limits: AcceptanceLimits,
    n_sim: int,
    seed: int = 0,
    stream_id: int = 0,
    workers: int = 1,
) -> Estimate:
    """Average plug-in content over datasets simulated from known truth.

    There is no closed form for this expectation; this is its Monte Carlo
    estimate, using the intermediate-precision estimate as sigma hat.
    """
    spec = SimulationSpec(bias, sigma_b, sigma_w, n_draws=n_sim, seed=seed, stream_id=stream_id)
    p, n = design.n_series, design.n_reps
    per_chunk = max(1, CHUNK_DRAWS // (p * n))
    lam = limits.lam

    def work(rng, size):
        values = _draw_datasets(rng, size, p, n, spec)
        a = anova_batch(values)
        s = np.sqrt(a["var_ip"])
        ok = s > 0.0
        mu, s = a["grand_mean"][ok], s[ok]
        content = ndtr((lam - mu) / s) - ndtr((-lam - mu) / s)
        return math.fsum(content), math.fsum(content * content), int(ok.sum())

    parts = _run_chunks(work, n_sim, per_chunk, seed, stream_id, workers)
    total = sum(x[0] for x in parts)
    sum_sq = sum(x[1] for x in parts)
    used = sum(x[2] for x in parts)
    if used == 0:
        raise DegenerateVarianceError("every simulated dataset had a degenerate variance estimate")
    mean = total / used
    var = max(0.0, sum_sq / used - mean * mean)
    return Estimate(mean, math.sqrt(var / used), used)


def stream_correlation(seed: int, streams: Sequence[int], n: int) -> float:
    """Pearson correlation between the first ``n`` normals of two streams."""
    a, b = (generator(seed, s).standard_normal(n) for s in streams)
    return float(np.corrcoef(a, b)[0, 1])
