"""Command line front end.

Exit codes: 0 success, 1 computational or data error (or a failed Monte
Carlo check), 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .capability import AcceptanceLimits, MethodProfile, prob_within_limits, region_boundary_sigma
from .datasets import read_dataset
from .errors import AssayRiskError
from .mcoracle import (
    SimulationSpec,
    components_content,
    empirical_prob_within,
    empirical_run_accept,
    sigma_for_prob,
    ti_coverage_experiment,
)
from .reconcile import DEFAULT_TARGET, consumer_risk_table, reconcile
from .runrules import RULE_GRAMMAR, RunRule, oc_accept_prob, parse_rule
from .serialize import SCHEMA_VERSION, to_csv, to_json
from .tolerance import (
    MODES,
    ValidationDesign,
    beta_expectation_interval,
    estimate_components,
    prestudy_decision,
)

COVERAGE_TOLERANCE = 0.01
DEFAULT_OC_P = (0.5, 2.0 / 3.0, 0.8, 0.9, 0.95)


class UsageError(Exception):
    pass


# --- argument types --------------------------------------------------------

def _float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def open_probability(text: str) -> float:
    value = _float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie strictly between 0 and 1: {text!r}")
    return value


def closed_probability(text: str) -> float:
    value = _float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1]: {text!r}")
    return value


def positive(text: str) -> float:
    value = _float(text)
    if value <= 0.0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def non_negative(text: str) -> float:
    value = _float(text)
    if value < 0.0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return value


def seed_type(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def rule_type(text: str) -> RunRule:
    try:
        return parse_rule(text)
    except AssayRiskError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def grid_type(text: str) -> list[float]:
    """``a,b,c`` or inclusive ``start:stop:step``; empty text is an empty grid."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"grid range must be start:stop:step, got {text!r}")
        start, stop, step = (_float(p) for p in parts)
        if step <= 0.0 or stop < start:
            raise argparse.ArgumentTypeError(f"grid range needs step > 0 and stop >= start: {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]
    return [_float(p) for p in text.split(",")]


# --- config file -----------------------------------------------------------

def read_config(path: str) -> list[tuple[str, str]]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    entries = []
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"config line {number}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        entries.append((key, value))
    return entries


def _merge_config(argv: list[str]) -> list[str]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    injected = []
    for key, value in read_config(known.config):
        flag = f"--{key}"
        if flag in given or key == "config":
            continue
        injected.append(f"{flag}={value}")
    # appended so they land after the subcommand name
    return argv + injected


# --- output ----------------------------------------------------------------

def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _error_entry(exc: AssayRiskError) -> dict:
    return {"code": exc.code, "message": str(exc)}


def _rule_doc(rule: RunRule) -> dict:
    return {
        "text": str(rule),
        "k_min": rule.k_min,
        "m": rule.m,
        "lambda": rule.lam,
        "layout": list(rule.layout) if rule.layout else None,
        "constrained": rule.constrained,
    }


def _base_document(command: str, inputs: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "status": "ok",
        "inputs": inputs,
        "required_beta": None,
        "capability": None,
        "tolerance_interval": [],
        "prestudy_decision": [],
        "oc_table": [],
        "mc_crosschecks": [],
        "errors": [],
    }


def _level_results(level, dataset, beta: float, limits: AcceptanceLimits, mode: str):
    components = estimate_components(dataset)
    interval = beta_expectation_interval(components, beta, mode)
    decision = prestudy_decision(interval, limits)
    design = dataset.design
    ti = {
        "level": level,
        "n_series": design.n_series,
        "n_reps": design.n_reps,
        "bias_hat": components.bias_hat,
        "ms_between": components.ms_between,
        "ms_within": components.ms_within,
        "var_between": components.var_between,
        "var_within": components.var_within,
        "var_ip": components.var_ip,
        "sigma_ip": components.sigma_ip,
        "mode": interval.mode,
        "sigma_used": interval.sigma,
        "beta": interval.beta,
        "k_factor": interval.k_factor,
        "dof": interval.dof,
        "lower": interval.lower,
        "upper": interval.upper,
        "plugin_content": components_content(components, limits),
    }
    pd = {
        "level": level,
        "accepted": decision.accepted,
        "margin_lower": decision.margin_lower,
        "margin_upper": decision.margin_upper,
        "one_sided_guarantee": decision.one_sided_guarantee,
    }
    return components, ti, pd


def _coverage_check(components, design: ValidationDesign, beta, mode, n, seed, workers) -> dict:
    sigma_b = math.sqrt(components.var_between)
    sigma_w = math.sqrt(components.var_within)
    res = ti_coverage_experiment(
        components.bias_hat, sigma_b, sigma_w, design, beta, mode, n, seed=seed, workers=workers
    )
    dev = res.mean_content - beta
    return {
        "quantity": "tolerance_interval_mean_content",
        "seed": seed,
        "n": n,
        "estimate": res.mean_content,
        "se": res.se,
        "analytic": beta,
        "deviation": dev,
        "tolerance": COVERAGE_TOLERANCE,
        "pass": abs(dev) <= COVERAGE_TOLERANCE,
        "n_degenerate": res.n_degenerate,
    }


def _run_check(rule: RunRule, p: float, n: int, seed: int, workers: int) -> dict:
    spec = SimulationSpec(0.0, 0.0, sigma_for_prob(p, rule.lam), n_draws=n, seed=seed)
    est = empirical_run_accept(rule, spec, workers)
    analytic = oc_accept_prob(rule, p)
    return {
        "quantity": "run_acceptance",
        "seed": seed,
        "n": n,
        "estimate": est.value,
        "se": est.se,
        "analytic": analytic,
        "deviation": est.value - analytic,
        "tolerance": 4.0 * est.se,
        "pass": est.agrees_with(analytic),
        "n_degenerate": 0,
    }


# --- subcommands -----------------------------------------------------------

def cmd_region(args) -> int:
    limits = AcceptanceLimits(args.lam)
    rows = []
    for beta in args.beta:
        for bias in args.bias_grid:
            rows.append((beta, bias, region_boundary_sigma(bias, limits, beta)))
    _emit(to_csv(("beta", "bias", "sigma_boundary"), rows), args.out)
    return 0


def cmd_oc(args) -> int:
    ps = list(args.p or [])
    if args.grid is not None:
        ps.extend(args.grid)
    if args.p is None and args.grid is None:
        ps = grid_type("0:1:0.01")
    ps = sorted(ps)
    rows = [(p, r.accept_prob, r.reject_prob) for p in ps for r in consumer_risk_table(args.rule, [p])]
    _emit(to_csv(("p", "accept_prob", "reject_prob"), rows), args.out)
    return 0


def _oc_table(rule: RunRule, extra: Sequence[float]) -> list[dict]:
    ps = sorted(set(DEFAULT_OC_P) | {p for p in extra if 0.0 <= p <= 1.0})
    return [
        {"p": r.p, "accept_prob": r.accept_prob, "reject_prob": r.reject_prob}
        for r in consumer_risk_table(rule, ps)
    ]


def cmd_reconcile(args) -> int:
    rule: RunRule = args.rule
    lam = args.lam if args.lam is not None else rule.lam
    inputs = {
        "rule": _rule_doc(rule),
        "target_run_accept": args.target,
        "lambda": lam,
        "granularity": args.granularity,
        "mode": args.mode,
        "dataset": args.dataset,
        "bias": args.bias,
        "sigma": args.sigma,
        "mc_n": args.mc_n,
        "seed": args.seed,
    }
    doc = _base_document("reconcile", inputs)
    status = 0
    try:
        limits = AcceptanceLimits(lam)
        profile = MethodProfile(args.bias, args.sigma) if args.sigma is not None else None
        report = reconcile(rule, args.target, limits, profile, granularity=args.granularity, mode=args.mode)
        beta = report.required_beta
        doc["required_beta"] = {
            "target_run_accept": report.target_run_accept,
            "raw": report.raw_beta,
            "granularity": report.granularity,
            "used": beta,
            "oc_at_raw": report.oc_at_raw_beta,
            "oc_at_used": report.oc_at_required_beta,
        }
        if profile is not None:
            doc["capability"] = {
                "bias": profile.bias_mu,
                "sigma": profile.sigma_m,
                "prob_within": report.prob_within,
                "beta": beta,
                "capable": report.capability_verdict,
                "run_accept_at_prob_within": oc_accept_prob(rule, report.prob_within),
            }
        doc["oc_table"] = _oc_table(rule, [report.raw_beta, beta])
        if args.dataset:
            status = _validate_levels(doc, args.dataset, beta, limits, args)
        if args.mc_n:
            check = _run_check(rule, beta, args.mc_n, args.seed, args.workers)
            doc["mc_crosschecks"].append(check)
    except AssayRiskError as exc:
        doc["errors"].append(_error_entry(exc))
        status = 1
    return _finish(doc, status, args.out)


def _validate_levels(doc: dict, path: str, beta: float, limits: AcceptanceLimits, args) -> int:
    status = 0
    levels = read_dataset(path)
    for level, dataset in levels.items():
        try:
            components, ti, pd = _level_results(level, dataset, beta, limits, args.mode)
        except AssayRiskError as exc:
            entry = _error_entry(exc)
            entry["level"] = level
            doc["errors"].append(entry)
            status = 1
            continue
        doc["tolerance_interval"].append(ti)
        doc["prestudy_decision"].append(pd)
        if getattr(args, "mc_coverage_n", 0):
            check = _coverage_check(
                components, dataset.design, beta, args.mode, args.mc_coverage_n, args.seed, args.workers
            )
            check["level"] = level
            doc["mc_crosschecks"].append(check)
    return status


def _finish(doc: dict, status: int, out: Optional[str]) -> int:
    if doc["errors"]:
        doc["status"] = "error"
        status = 1
        for err in doc["errors"]:
            where = f" (level {err['level']:g})" if "level" in err else ""
            print(f"error [{err['code']}]{where}: {err['message']}", file=sys.stderr)
    _emit(to_json(doc), out)
    return status


def cmd_validate(args) -> int:
    inputs = {
        "dataset": args.dataset,
        "beta": args.beta,
        "lambda": args.lam,
        "mode": args.mode,
        "mc_coverage_n": args.mc_coverage_n,
        "seed": args.seed,
    }
    doc = _base_document("validate", inputs)
    doc["required_beta"] = {
        "target_run_accept": None,
        "raw": None,
        "granularity": None,
        "used": args.beta,
        "oc_at_raw": None,
        "oc_at_used": None,
    }
    status = 0
    try:
        limits = AcceptanceLimits(args.lam)
        status = _validate_levels(doc, args.dataset, args.beta, limits, args)
    except AssayRiskError as exc:
        doc["errors"].append(_error_entry(exc))
        status = 1
    return _finish(doc, status, args.out)


SIM_HEADER = (
    "what", "params", "seed", "stream_id", "n", "estimate", "se",
    "analytic", "deviation", "tolerance", "pass",
)


def cmd_simulate(args) -> int:
    what = args.what
    if what == "within":
        n = args.n or 1_000_000
        lam = args.lam if args.lam is not None else 15.0
        spec = SimulationSpec(args.bias, args.sigma_b, args.sigma_w, n, args.seed, args.stream_id)
        est = empirical_prob_within(spec, AcceptanceLimits(lam), args.workers)
        analytic = prob_within_limits(MethodProfile(args.bias, spec.sigma_total), AcceptanceLimits(lam))
        params = f"bias={args.bias!r};sigma_b={args.sigma_b!r};sigma_w={args.sigma_w!r};lambda={lam!r}"
        tol, value, se = 4.0 * est.se, est.value, est.se
        ok = est.agrees_with(analytic)
    elif what == "run":
        if args.rule is None:
            raise UsageError("--what run needs --rule")
        rule = args.rule
        n = args.n or 1_000_000
        if args.p is not None:
            bias, sigma_w = 0.0, sigma_for_prob(args.p, rule.lam)
        else:
            bias, sigma_w = args.bias, args.sigma_w
        if args.sigma_b:
            raise UsageError("--what run compares against the binomial OC and needs --sigma-b 0")
        spec = SimulationSpec(bias, 0.0, sigma_w, n, args.seed, args.stream_id)
        est = empirical_run_accept(rule, spec, args.workers)
        p_within = prob_within_limits(MethodProfile(bias, sigma_w), AcceptanceLimits(rule.lam))
        analytic = oc_accept_prob(rule, p_within)
        params = f"rule={rule};bias={bias!r};sigma_w={sigma_w!r};p={p_within!r}"
        tol, value, se = 4.0 * est.se, est.value, est.se
        ok = est.agrees_with(analytic)
    else:
        if args.beta is None:
            raise UsageError("--what coverage needs --beta")
        n = args.n or 100_000
        design = ValidationDesign(args.series, args.reps)
        res = ti_coverage_experiment(
            args.bias, args.sigma_b, args.sigma_w, design, args.beta, args.mode, n,
            seed=args.seed, stream_id=args.stream_id, workers=args.workers,
        )
        analytic = args.beta
        params = (
            f"mode={args.mode};bias={args.bias!r};sigma_b={args.sigma_b!r};sigma_w={args.sigma_w!r};"
            f"series={args.series};reps={args.reps};degenerate={res.n_degenerate}"
        )
        value, se, tol = res.mean_content, res.se, COVERAGE_TOLERANCE
        ok = abs(value - analytic) <= tol
    row = (what, params, args.seed, args.stream_id, n, value, se, analytic, value - analytic, tol, ok)
    _emit(to_csv(SIM_HEADER, [row]), args.out)
    if not ok:
        print(f"Monte Carlo check failed: estimate {value:.6g} vs analytic {analytic:.6g}", file=sys.stderr)
        return 1
    return 0


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assayrisk",
        description="Risk-based decision rules for analytical method validation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value file with defaults for long flags")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help=argparse.SUPPRESS)
        p.add_argument("--out", help="output path (default stdout)")

    p = sub.add_parser("region", help="acceptance-region boundary curves (CSV)")
    common(p)
    p.add_argument("--lambda", dest="lam", type=positive, required=True)
    p.add_argument("--beta", type=open_probability, action="append", required=True)
    p.add_argument("--bias-grid", type=grid_type, default=grid_type("-15:15:0.5"),
                   help="a,b,c or start:stop:step (default -15:15:0.5)")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("oc", help="operating characteristic of a run rule (CSV)")
    common(p)
    p.add_argument("--rule", type=rule_type, required=True, help=RULE_GRAMMAR)
    p.add_argument("--p", type=closed_probability, action="append")
    p.add_argument("--grid", type=grid_type, help="p grid as a,b,c or start:stop:step")
    p.set_defaults(func=cmd_oc)

    p = sub.add_parser("reconcile", help="derive beta from a run rule and apply it (JSON)")
    common(p)
    p.add_argument("--rule", type=rule_type, required=True, help=RULE_GRAMMAR)
    p.add_argument("--target", type=open_probability, default=DEFAULT_TARGET)
    p.add_argument("--lambda", dest="lam", type=positive)
    p.add_argument("--granularity", type=positive)
    p.add_argument("--dataset")
    p.add_argument("--bias", type=_float, default=0.0)
    p.add_argument("--sigma", type=non_negative)
    p.add_argument("--mode", choices=MODES, default="oneway")
    p.add_argument("--mc-n", type=int, default=0, help="runs for an optional Monte Carlo OC check")
    p.add_argument("--mc-coverage-n", type=int, default=0)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--workers", type=positive_int, default=1)
    p.set_defaults(func=cmd_reconcile)

    p = sub.add_parser("validate", help="pre-study tolerance-interval decision per level (JSON)")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--beta", type=open_probability, required=True)
    p.add_argument("--lambda", dest="lam", type=positive, required=True)
    p.add_argument("--mode", choices=MODES, default="oneway")
    p.add_argument("--mc-coverage-n", type=int, default=0)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--workers", type=positive_int, default=1)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="Monte Carlo cross-check (CSV)")
    common(p)
    p.add_argument("--what", choices=("within", "run", "coverage"), required=True)
    p.add_argument("--rule", type=rule_type, help=RULE_GRAMMAR)
    p.add_argument("--p", type=closed_probability, help="per-sample probability for --what run")
    p.add_argument("--lambda", dest="lam", type=positive)
    p.add_argument("--bias", type=_float, default=0.0)
    p.add_argument("--sigma-b", type=non_negative, default=0.0)
    p.add_argument("--sigma-w", type=non_negative, default=1.0)
    p.add_argument("--beta", type=open_probability)
    p.add_argument("--mode", choices=MODES, default="oneway")
    p.add_argument("--series", type=positive_int, default=5)
    p.add_argument("--reps", type=positive_int, default=4)
    p.add_argument("--n", type=positive_int)
    p.add_argument("--seed", type=seed_type, default=0)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--workers", type=positive_int, default=1)
    p.set_defaults(func=cmd_simulate)
    return parser


_NUMERIC_VALUE_FLAGS = {"--bias-grid", "--grid", "--bias"}


def _attach_negative_values(argv: list[str]) -> list[str]:
    # argparse would read "-15,0,15" as an option; glue it to its flag
    out: list[str] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if (
            token in _NUMERIC_VALUE_FLAGS
            and i + 1 < len(argv)
            and argv[i + 1][:1] == "-"
            and argv[i + 1][1:2] in set("0123456789.")
        ):
            out.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        out.append(token)
        i += 1
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    try:
        argv = _merge_config(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"assayrisk: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"assayrisk: error: {exc}", file=sys.stderr)
        return 2
    except AssayRiskError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
