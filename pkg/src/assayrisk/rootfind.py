"""Bracketed bisection for monotone scalar functions."""

from __future__ import annotations

from typing import Callable


def bisect_increasing(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    xtol: float = 1e-13,
    ftol: float = 0.0,
    maxiter: int = 400,
) -> tuple[float, float]:
    """Shrink ``[lo, hi]`` around the sign change of a non-decreasing ``f``.

    Requires ``f(lo) < 0 <= f(hi)``. Returns the final ``(lo, hi)``; ``hi``
    always satisfies ``f(hi) >= 0``. Iteration stops once the bracket is no
    wider than ``xtol`` or ``|f(hi)| <= ftol``.
    """
    if not lo < hi:
        raise ValueError(f"empty bracket [{lo}, {hi}]")
    f_hi = f(hi)
    for _ in range(maxiter):
        if hi - lo <= xtol or f_hi <= ftol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid < 0.0:
            lo = mid
        else:
            hi, f_hi = mid, f_mid
    return lo, hi
