"""In-study k-of-m-lambda run rules and their operating characteristics.

A run passes when at least ``k_min`` of its ``m`` QC samples fall within
+/- ``lam`` percent of nominal. The constrained variant also rejects a run in
which both duplicates of any one concentration fail.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .distributions import binom_tail_geq, check_probability
from .errors import ComplexityError, DomainError, RuleSyntaxError, UnreachableTargetError
from .rootfind import bisect_increasing

MAX_ENUMERATION_M = 20

RULE_GRAMMAR = "k-m-lambda[:constrained[g1,g2,...]], e.g. 4-6-15 or 4-6-15:constrained[2,2,2]"
_RULE_RE = re.compile(
    r"^\s*(\d+)-(\d+)-(\d+(?:\.\d*)?|\.\d+)\s*(?::\s*constrained\s*\[\s*(\d+(?:\s*,\s*\d+)*)\s*\])?\s*$"
)


@dataclass(frozen=True)
class RunRule:
    k_min: int
    m: int
    lam: float
    layout: Optional[tuple[int, ...]] = None
    constrained: bool = False

    def __post_init__(self):
        if not 1 <= self.k_min <= self.m:
            raise DomainError(f"rule needs 1 <= k_min <= m, got k_min={self.k_min}, m={self.m}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"rule limit must be positive, got {self.lam!r}")
        object.__setattr__(self, "lam", float(self.lam))
        if self.layout is not None:
            layout = tuple(int(g) for g in self.layout)
            if any(g < 1 for g in layout) or sum(layout) != self.m:
                raise DomainError(f"layout {list(layout)} must hold positive sizes summing to m={self.m}")
            object.__setattr__(self, "layout", layout)
        if self.constrained:
            if self.layout is None:
                raise DomainError("a constrained rule needs a layout")
            if any(g != 2 for g in self.layout):
                # "not both at the same concentration" is only defined for duplicates
                raise DomainError(
                    f"constrained rules require duplicate groups (size 2), got {list(self.layout)}"
                )

    def __str__(self) -> str:
        return format_rule(self)

    def accepts(self, within: Sequence[bool]) -> bool:
        """Apply the rule to one run's per-sample pass/fail flags, in layout order."""
        if len(within) != self.m:
            raise DomainError(f"expected {self.m} QC results, got {len(within)}")
        if sum(bool(w) for w in within) < self.k_min:
            return False
        if self.constrained:
            start = 0
            for size in self.layout:
                if not any(within[start:start + size]):
                    return False
                start += size
        return True


def _format_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def format_rule(rule: RunRule) -> str:
    text = f"{rule.k_min}-{rule.m}-{_format_number(rule.lam)}"
    if rule.constrained:
        text += ":constrained[" + ",".join(str(g) for g in rule.layout) + "]"
    return text


def parse_rule(text: str) -> RunRule:
    """Parse ``"4-6-15"`` or ``"4-6-15:constrained[2,2,2]"``."""
    match = _RULE_RE.match(text or "")
    if match is None:
        raise RuleSyntaxError(f"malformed rule {text!r}; expected {RULE_GRAMMAR}")
    k_min, m, lam, groups = match.groups()
    layout = tuple(int(g) for g in groups.split(",")) if groups else None
    try:
        return RunRule(int(k_min), int(m), float(lam), layout, constrained=groups is not None)
    except DomainError as exc:
        raise RuleSyntaxError(f"invalid rule {text!r}: {exc}") from exc


@lru_cache(maxsize=64)
def _accepting_counts(k_min: int, m: int, layout: tuple[int, ...]) -> tuple[int, ...]:
    """Number of accepted pass/fail patterns for each count of passes 0..m.

    Bit i of a pattern is set when sample i is within limits.
    """
    patterns = np.arange(1 << m, dtype=np.int64)
    passes = np.zeros(patterns.shape, dtype=np.int64)
    for i in range(m):
        passes += (patterns >> i) & 1
    ok = passes >= k_min
    start = 0
    for size in layout:
        group_bits = ((1 << size) - 1) << start
        ok &= (patterns & group_bits) != 0
        start += size
    return tuple(int(c) for c in np.bincount(passes[ok], minlength=m + 1))


def oc_accept_prob(rule: RunRule, p: float) -> float:
    """Run acceptance probability when each sample is within limits w.p. ``p``."""
    p = check_probability(p)
    if not rule.constrained:
        return binom_tail_geq(rule.k_min, rule.m, p)
    if rule.m > MAX_ENUMERATION_M:
        raise ComplexityError(
            f"constrained rules are enumerated exactly; m={rule.m} exceeds {MAX_ENUMERATION_M}"
        )
    counts = _accepting_counts(rule.k_min, rule.m, rule.layout)
    if p == 1.0:
        return 1.0 if counts[rule.m] else 0.0
    if p == 0.0:
        return 1.0 if counts[0] else 0.0
    terms = (
        c * math.exp(j * math.log(p) + (rule.m - j) * math.log1p(-p))
        for j, c in enumerate(counts)
        if c
    )
    return min(1.0, math.fsum(terms))


@dataclass(frozen=True)
class OCCurve:
    rule: RunRule
    points: tuple[tuple[float, float], ...]


def oc_curve(rule: RunRule, p_grid: Sequence[float]) -> OCCurve:
    grid = [check_probability(p) for p in p_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("p grid must be sorted ascending")
    points = tuple((p, oc_accept_prob(rule, p)) for p in grid)
    accept = [a for _, a in points]
    assert all(b >= a for a, b in zip(accept, accept[1:])), "OC curve is not monotone"
    return OCCurve(rule, points)


def invert_oc(rule: RunRule, target_accept: float) -> float:
    """Smallest per-sample probability whose run acceptance reaches the target.

    Bisection on the monotone OC down to a bracket of width 1e-12; the upper
    end of the bracket is returned, so the OC there is never below target.
    """
    target = float(target_accept)
    if not math.isfinite(target) or target <= 0.0:
        raise DomainError(f"target acceptance must lie in (0, 1), got {target_accept!r}")
    if target >= 1.0:
        raise UnreachableTargetError("a run acceptance of 1 is only reached at p = 1")
    _, hi = bisect_increasing(lambda p: oc_accept_prob(rule, p) - target, 0.0, 1.0, xtol=1e-12)
    return hi
