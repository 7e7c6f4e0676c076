import math

import numpy as np
import pytest

from assayrisk.capability import AcceptanceLimits
from assayrisk.distributions import normal_quantile, t_quantile
from assayrisk.errors import DegenerateVarianceError, DesignError, DomainError, UnbalancedDesignError
from assayrisk.mcoracle import ti_coverage_experiment
from assayrisk.tolerance import (
    ToleranceInterval,
    ValidationDataset,
    ValidationDesign,
    VarianceComponents,
    beta_expectation_interval,
    estimate_components,
    k_factor_oneway,
    k_factor_simple,
    prestudy_decision,
    satterthwaite_dof,
)

WORKED = [[-2.0, 0.0], [2.0, 4.0]]


def two_pass_anova(rows):
    """Plain loops: means first, then sums of squares."""
    p, n = len(rows), len(rows[0])
    means = [sum(r) / n for r in rows]
    grand = sum(sum(r) for r in rows) / (p * n)
    ssw = sum((x - means[i]) ** 2 for i, r in enumerate(rows) for x in r)
    ssb = n * sum((mu - grand) ** 2 for mu in means)
    sst = sum((x - grand) ** 2 for r in rows for x in r)
    msw = ssw / (p * (n - 1))
    msb = ssb / (p - 1)
    return grand, msw, msb, max(0.0, (msb - msw) / n), ssw, ssb, sst


@pytest.fixture
def worked():
    return estimate_components(ValidationDataset.from_matrix(WORKED))


class TestEstimateComponents:
    def test_worked_example(self, worked):
        assert worked.bias_hat == 1.0
        assert worked.ms_within == 2.0
        assert worked.ms_between == 16.0
        assert worked.var_between == 7.0
        assert worked.var_ip == 9.0
        assert worked.var_ip == worked.var_between + worked.var_within

    def test_constant_data_is_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            estimate_components(ValidationDataset.from_matrix([[3.0, 3.0], [3.0, 3.0]]))

    def test_negative_between_component_truncated(self):
        # identical series means, within-series spread only
        comp = estimate_components(ValidationDataset.from_matrix([[-1.0, 1.0], [1.0, -1.0], [0.5, -0.5]]))
        assert comp.ms_between < comp.ms_within
        assert comp.var_between == 0.0
        assert comp.var_ip == comp.var_within

    def test_single_replicate_unidentifiable(self):
        with pytest.raises(DesignError):
            estimate_components(ValidationDataset.from_matrix([[1.0], [2.0], [4.0]]))

    def test_one_series_rejected(self):
        with pytest.raises(DesignError, match="n_series >= 2"):
            ValidationDataset.from_matrix([[1.0, 2.0]])

    def test_unbalanced_rejected(self):
        with pytest.raises(UnbalancedDesignError):
            ValidationDataset.from_matrix([[1.0, 2.0], [1.0]])
        with pytest.raises(UnbalancedDesignError):
            ValidationDataset.from_records([("a", 1, 1.0), ("a", 2, 2.0), ("b", 1, 0.0)])

    def test_records_and_pairs(self):
        ds = ValidationDataset.from_pairs(
            [("d1", 1, 100.0, 98.0), ("d1", 2, 100.0, 100.0), ("d2", 1, 100.0, 102.0), ("d2", 2, 100.0, 104.0)]
        )
        np.testing.assert_allclose(ds.values, WORKED, rtol=1e-12)
        assert ds.series_ids == ("d1", "d2")
        assert ds.design.level == 100.0

    def test_dataset_values_immutable(self):
        ds = ValidationDataset.from_matrix(WORKED)
        with pytest.raises(ValueError):
            ds.values[0, 0] = 5.0

    @pytest.mark.parametrize("seed", range(12))
    def test_matches_two_pass_on_random_datasets(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 51))
        n = int(rng.integers(2, 51))
        rows = (rng.normal(rng.normal(0, 5), 3, (p, 1)) + rng.normal(0, 2, (p, n))).tolist()
        comp = estimate_components(ValidationDataset.from_matrix(rows))
        grand, msw, msb, vb, ssw, ssb, sst = two_pass_anova(rows)
        assert comp.bias_hat == pytest.approx(grand, rel=1e-9, abs=1e-12)
        assert comp.ms_within == pytest.approx(msw, rel=1e-9)
        assert comp.ms_between == pytest.approx(msb, rel=1e-9)
        assert comp.var_between == pytest.approx(vb, rel=1e-9, abs=1e-12)
        assert comp.var_total == pytest.approx(sst / (p * n - 1), rel=1e-9)
        # total SS = within SS + between SS
        assert ssw + ssb == pytest.approx(sst, rel=1e-9)


class TestKFactorSimple:
    def test_n20_beta80(self):
        k, dof = k_factor_simple(20, 0.8)
        assert dof == 19
        assert k == pytest.approx(1.3605, abs=1e-3)
        assert k == pytest.approx(1.3277282090267984 * math.sqrt(1.05), abs=1e-10)

    def test_normal_limit(self):
        k, _ = k_factor_simple(10**6, 0.8)
        assert k == pytest.approx(1.28155, abs=1e-4)

    def test_n2_beta95(self):
        k, dof = k_factor_simple(2, 0.95)
        assert dof == 1
        assert k == pytest.approx(math.tan(math.pi * 0.475) * math.sqrt(1.5), abs=1e-9)
        assert k == pytest.approx(15.562, abs=1e-2)

    def test_exceeds_normal_and_decreases(self):
        for beta in (0.667, 0.8, 0.95):
            ks = [k_factor_simple(n, beta)[0] for n in (2, 3, 5, 10, 30, 100, 1000)]
            assert all(b < a for a, b in zip(ks, ks[1:]))
            assert ks[-1] > normal_quantile((1 + beta) / 2)

    def test_n_too_small(self):
        with pytest.raises(DesignError):
            k_factor_simple(1, 0.8)


class TestKFactorOneway:
    def test_zero_ratio_structure(self):
        comp = VarianceComponents(0.0, 0.0, 1.0, 1.0, 0.5, 1.0, ValidationDesign(5, 4))
        k, dof = k_factor_oneway(comp, 0.8)
        expected_dof = 1.0 / ((1 / 4) ** 2 / 4 + (1 - 1 / 4) / 20)
        assert dof == pytest.approx(expected_dof, rel=1e-12)
        assert dof > 0
        assert k > normal_quantile(0.9)
        assert k == pytest.approx(t_quantile(0.9, expected_dof) * math.sqrt(1.05), rel=1e-12)

    def test_worked_example(self, worked):
        k, dof = k_factor_oneway(worked, 0.8)
        # R = 7/2, p = n = 2
        r = 3.5
        nu = (r + 1) ** 2 / ((r + 0.5) ** 2 / 1 + 0.5 / 4)
        b2 = (r + 1) / (2 * r + 1)
        assert dof == pytest.approx(nu, rel=1e-12)
        assert k == pytest.approx(t_quantile(0.9, nu) * math.sqrt(1 + 1 / (4 * b2)), rel=1e-12)

    def test_increasing_in_beta(self, worked):
        ks = [k_factor_oneway(worked, b)[0] for b in (0.5, 0.8, 0.9, 0.99, 0.9999, 1 - 1e-9)]
        assert all(b > a for a, b in zip(ks, ks[1:]))
        assert ks[-1] > 1e3

    def test_satterthwaite_limits(self):
        # large ratio: only the p - 1 series carry information
        assert satterthwaite_dof(1e9, 6, 3) == pytest.approx(5.0, rel=1e-6)

    def test_degenerate(self):
        with pytest.raises(DegenerateVarianceError):
            VarianceComponents(0.0, 1.0, 0.0, 1.0, 2.0, 0.0, ValidationDesign(3, 2))


class TestInterval:
    def test_arithmetic(self):
        comp = VarianceComponents(0.0, 0.0, 1.0, 1.0, 1.0, 1.0, ValidationDesign(5, 4), var_total=1.0)
        ti = beta_expectation_interval(comp, 0.8, "simple")
        k = k_factor_simple(20, 0.8)[0]
        assert (ti.lower, ti.upper) == pytest.approx((-k, k))
        assert ti.lower < ti.upper

    def test_worked_example_centered(self, worked):
        ti = beta_expectation_interval(worked, 0.8, "oneway")
        k, dof = k_factor_oneway(worked, 0.8)
        assert ti.center == 1.0 and ti.sigma == 3.0
        assert ti.lower == pytest.approx(1 - 3 * k) and ti.upper == pytest.approx(1 + 3 * k)
        assert ti.dof == dof and ti.beta == 0.8

    def test_bad_mode(self, worked):
        with pytest.raises(DomainError):
            beta_expectation_interval(worked, 0.8, "content")

    @pytest.mark.slow
    def test_worked_example_coverage(self, worked):
        """Treating the worked example's estimates as the truth, intervals
        built by the oneway recipe keep an expected content of beta."""
        res = ti_coverage_experiment(
            1.0, math.sqrt(7.0), math.sqrt(2.0), ValidationDesign(2, 2), 0.8, "oneway", 100_000, seed=5
        )
        assert res.n_degenerate == 0
        assert abs(res.mean_content - 0.8) <= 0.01


class TestPrestudyDecision:
    @staticmethod
    def interval(lo, hi):
        return ToleranceInterval(lo, hi, 1.0, 10.0, 0.8, (lo + hi) / 2, (hi - lo) / 2, "oneway")

    def test_contained(self):
        d = prestudy_decision(self.interval(-10, 12), AcceptanceLimits(15))
        assert d.accepted
        assert (d.margin_lower, d.margin_upper) == (5, 3)
        assert d.one_sided_guarantee

    def test_lower_violation(self):
        d = prestudy_decision(self.interval(-16, 3), AcceptanceLimits(15))
        assert not d.accepted
        assert d.margin_lower == -1

    def test_touching_limits_rejected(self):
        assert not prestudy_decision(self.interval(-15, 15), AcceptanceLimits(15)).accepted
