"""Young's inequality instrument and competitive-ratio reporting."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..engine import CostSummary
from ..errors import InvalidParameterError

YOUNG_TOL = 1e-9


@dataclass(frozen=True)
class YoungResult:
    lhs: float
    rhs: float

    @property
    def ok(self) -> bool:
        return self.lhs >= self.rhs - YOUNG_TOL


def young_check(alpha: float, g: float, h: float) -> YoungResult:
    """``g h <= int_0^g f + int_0^h f^-1`` for ``f(x) = x^(alpha-1)``."""
    if not (math.isfinite(alpha) and alpha > 1):
        raise InvalidParameterError(f"alpha must be > 1, got {alpha}")
    if not (g >= 0 and h >= 0 and math.isfinite(g) and math.isfinite(h)):
        raise InvalidParameterError(f"g and h must be finite and >= 0, got {g}, {h}")
    return YoungResult(_pow(g, alpha) / alpha + _pow(h, alpha / (alpha - 1.0)) * (alpha - 1.0) / alpha, g * h)


def _pow(x: float, e: float) -> float:
    # the conjugate exponent blows up as alpha -> 1; the integral is then +inf
    try:
        return x**e
    except OverflowError:
        return math.inf


def ratio(alg_cost: CostSummary | float, ref_cost: float) -> float:
    """Competitive ratio of an algorithm's total cost against a reference cost."""
    if not (ref_cost > 0):
        raise InvalidParameterError(f"reference cost must be > 0, got {ref_cost}")
    total = alg_cost.total if isinstance(alg_cost, CostSummary) else float(alg_cost)
    return total / ref_cost
