"""Acceptance suite: ten end-to-end criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline, or
``python tests/test_acceptance.py`` to run the criteria without pytest.
The lines are also repeated in the pytest terminal summary.
"""

import contextlib
import io
import sys
from fractions import Fraction
from itertools import product

import mpmath
import numpy as np
import pytest

from assayrisk.capability import AcceptanceLimits, region_boundary_sigma
from assayrisk.cli import main
from assayrisk.distributions import normal_cdf, normal_quantile, t_cdf, t_quantile
from assayrisk.mcoracle import SimulationSpec, empirical_prob_within, empirical_run_accept, sigma_for_prob
from assayrisk.mcoracle import ti_coverage_experiment
from assayrisk.reconcile import round_up
from assayrisk.runrules import RunRule, invert_oc, oc_accept_prob
from assayrisk.tolerance import ValidationDataset, ValidationDesign, estimate_components

RESULTS: dict[int, tuple[bool, str]] = {}

L15 = AcceptanceLimits(15)
RULE = RunRule(4, 6, 15)
RULE_C = RunRule(4, 6, 15, (2, 2, 2), True)


def exact_oc(rule, p):
    p = Fraction(p)
    return sum(
        (p ** sum(o) * (1 - p) ** (rule.m - sum(o)) for o in product((False, True), repeat=rule.m) if rule.accepts(o)),
        Fraction(0),
    )


def c1():
    value = oc_accept_prob(RULE, 0.8)
    return abs(value - 0.90112) <= 1e-12, f"OC(0.8) = {value!r}, target 0.90112 +/- 1e-12"


def c2():
    value = oc_accept_prob(RULE, 2 / 3)
    exact = exact_oc(RULE, Fraction(2, 3))
    ok = exact == Fraction(496, 729) and abs(value - 496 / 729) <= 1e-12 and round(1 - value, 4) == 0.3196
    return ok, f"OC(2/3) = {value!r}, exact {exact}, rejection {1 - value:.6f}"


def c3():
    value = oc_accept_prob(RULE, 0.5)
    exact = exact_oc(RULE, Fraction(1, 2))
    ok = exact == Fraction(22, 64) and abs(value - 0.34375) <= 1e-12
    return ok, f"OC(0.5) = {value!r}, exact {exact}"


def c4():
    root = invert_oc(RULE, 0.90)
    step = 1e-5
    grid = np.arange(0.75, 0.85 + step, step)
    oc = np.array([oc_accept_prob(RULE, float(p)) for p in grid])
    scan = float(grid[np.argmax(oc >= 0.90)])
    rounded = round_up(root, 0.01)
    ok = 0.7985 <= root <= 0.7995 and rounded == 0.80 and abs(root - scan) <= 1e-3
    return ok, f"root {root:.10f}, grid scan {scan:.5f}, rounded {rounded}"


def c5():
    betas = (2 / 3, 0.8, 0.9, 0.95, 0.99)
    expected = (15.505, 11.705, 9.120, 7.653, 5.823)
    ok, parts = True, []
    for i, (beta, sigma_ref) in enumerate(zip(betas, expected)):
        sigma = region_boundary_sigma(0.0, L15, beta)
        closed = 15 / normal_quantile((1 + beta) / 2)
        est = empirical_prob_within(SimulationSpec(0.0, 0.0, sigma, n_draws=1_000_000, seed=500, stream_id=i), L15)
        good = abs(sigma - sigma_ref) <= 0.01 and abs(sigma - closed) <= 0.01 and est.agrees_with(beta)
        ok &= good
        parts.append(f"{sigma:.4f} (z={est.z_score(beta):+.2f})")
    return ok, "sigma at bias 0: " + ", ".join(parts)


def c6():
    exact = exact_oc(RULE_C, Fraction(4, 5))
    value = oc_accept_prob(RULE_C, 0.8)
    spec = SimulationSpec(0.0, 0.0, sigma_for_prob(0.8, 15), n_draws=1_000_000, seed=600)
    est = empirical_run_accept(RULE_C, spec)
    ok = exact == Fraction(13312, 15625) and abs(value - 0.851968) <= 1e-12 and est.agrees_with(0.851968)
    return ok, f"enumeration {float(exact)}, package {value!r}, MC {est.value:.6f} (z={est.z_score(0.851968):+.2f})"


COVERAGE_CONFIGS = (
    # (sigma_b, sigma_w, series, reps, mode)
    (0.0, 1.0, 5, 4, "simple"),
    (2.0, 3.0, 6, 3, "oneway"),
)


def c7():
    ok, parts = True, []
    for j, (sb, sw, p, n, mode) in enumerate(COVERAGE_CONFIGS):
        for beta in (0.8, 0.95):
            res = ti_coverage_experiment(0.0, sb, sw, ValidationDesign(p, n), beta, mode, 100_000,
                                         seed=700, stream_id=j)
            good = abs(res.mean_content - beta) <= 0.01 and res.n_used + res.n_degenerate == 100_000
            ok &= good
            parts.append(f"({sb:g},{sw:g},{p},{n},{mode}) beta={beta}: {res.mean_content:.4f}")
    return ok, "; ".join(parts)


def c8():
    comp = estimate_components(ValidationDataset.from_matrix([[-2.0, 0.0], [2.0, 4.0]]))
    worked = (comp.bias_hat, comp.ms_within, comp.ms_between, comp.var_ip) == (1.0, 2.0, 16.0, 9.0)
    rng = np.random.default_rng(8)
    worst = 0.0
    for p, n in [(2, 2), (50, 50), (2, 50), (50, 2), (17, 9)]:
        rows = (rng.normal(0, 4, (p, 1)) + rng.normal(3, 2, (p, n))).tolist()
        c = estimate_components(ValidationDataset.from_matrix(rows))
        means = [sum(r) / n for r in rows]
        grand = sum(map(sum, rows)) / (p * n)
        msw = sum((x - means[i]) ** 2 for i, r in enumerate(rows) for x in r) / (p * (n - 1))
        msb = n * sum((m - grand) ** 2 for m in means) / (p - 1)
        for got, ref in ((c.bias_hat, grand), (c.ms_within, msw), (c.ms_between, msb)):
            worst = max(worst, abs(got - ref) / max(abs(ref), 1e-300))
    return worked and worst <= 1e-9, f"worked example exact: {worked}, worst relative error vs two-pass {worst:.2e}"


def c9():
    mpmath.mp.dps = 30
    grid = np.linspace(-8, 8, 10_000)
    err = max(abs(normal_cdf(z) - float(mpmath.ncdf(mpmath.mpf(float(z))))) for z in grid)
    t = t_quantile(0.9, 19)
    ps = np.linspace(0.001, 0.999, 500)
    rt_normal = max(abs(normal_cdf(normal_quantile(p)) - p) for p in ps)
    rt_t = max(abs(t_cdf(t_quantile(p, nu), nu) - p) for p in ps[::10] for nu in (1, 2.5, 19, 300))
    ok = err <= 1e-12 and abs(t - 1.327728) <= 1e-5 and rt_normal <= 1e-10 and rt_t <= 1e-10
    return ok, f"max |Phi - ref| {err:.1e}, t(0.9,19) {t:.7f}, round trips {rt_normal:.1e} / {rt_t:.1e}"


def _simulate_bytes(tmp, *argv):
    path = tmp / f"out{len(list(tmp.iterdir()))}.csv"
    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
        code = main(["simulate", *argv, "--out", str(path)])
    return code, path.read_bytes()


def c10(tmp):
    cases = [
        ("--what", "run", "--rule", "4-6-15", "--p", "0.8", "--n", "1000000", "--seed", "42"),
        ("--what", "coverage", "--beta", "0.8", "--mode", "oneway", "--sigma-b", "2", "--sigma-w", "3",
         "--series", "6", "--reps", "3", "--n", "20000", "--seed", "42"),
    ]
    ok = True
    for argv in cases:
        outs = [_simulate_bytes(tmp, *argv, "--workers", w) for w in ("1", "1", "4", "4")]
        ok &= len({o for _, o in outs}) == 1 and all(code == 0 for code, _ in outs)
    return ok, "simulate run/coverage outputs byte-identical over 2 runs x workers {1, 4}"


CRITERIA = {
    1: ("OC 4-6-15 at p=0.8", c1),
    2: ("OC at p=2/3", c2),
    3: ("OC at p=1/2", c3),
    4: ("OC inversion for target 0.90", c4),
    5: ("acceptance-region boundary at bias 0", c5),
    6: ("constrained 4-6-15 [2,2,2]", c6),
    7: ("beta-expectation coverage", c7),
    8: ("ANOVA oracle", c8),
    9: ("special-function accuracy", c9),
    10: ("simulate determinism", c10),
}


def report(number, ok, detail):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {CRITERIA[number][0]} | {detail}"
    RESULTS[number] = (ok, line)
    print(line)
    return ok


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, tmp_path):
    fn = CRITERIA[number][1]
    ok, detail = fn(tmp_path) if number == 10 else fn()
    assert report(number, ok, detail), detail


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    failures = 0
    for number, (_, fn) in CRITERIA.items():
        with tempfile.TemporaryDirectory() as d:
            ok, detail = fn(Path(d)) if number == 10 else fn()
        failures += not report(number, ok, detail)
    sys.exit(1 if failures else 0)
