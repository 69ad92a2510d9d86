"""Power functions P(s): energy consumed per unit time at speed s."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .errors import ConfigurationError, InvalidParameterError, PowerDomainError

POLYNOMIAL = "polynomial"
PATHOLOGICAL = "pathological"

# upper end of the pathological domain [0, 2)
_PATH_UPPER = 2.0


@dataclass(frozen=True)
class PowerFunction:
    """Immutable power function.

    Two kinds exist: ``polynomial`` with ``P(s) = s**alpha`` on ``[0, inf)``
    and ``pathological`` with ``P(s) = (4 (2 - s)) ** (-1/4)`` on ``[0, 2)``.
    The pathological one satisfies ``P'(s) = P(s)**5``, which makes it grow
    too quickly for any nonclairvoyant policy to stay O(1)-competitive.

    Use :func:`make_polynomial` / :func:`make_pathological` to build one.
    """

    kind: str
    alpha: float | None = None

    @property
    def domain_upper(self) -> float:
        return math.inf if self.kind == POLYNOMIAL else _PATH_UPPER

    @property
    def is_polynomial(self) -> bool:
        return self.kind == POLYNOMIAL

    def _check_speed(self, s: float) -> None:
        if not (s >= 0.0) or s >= self.domain_upper:
            raise PowerDomainError(
                f"speed {s!r} outside the domain [0, {self.domain_upper}) of {self}"
            )

    def eval(self, s: float) -> float:
        self._check_speed(s)
        if self.kind == POLYNOMIAL:
            return s**self.alpha
        return (4.0 * (_PATH_UPPER - s)) ** -0.25

    __call__ = eval

    def eval_extended(self, s: float) -> float:
        """Like :meth:`eval` but returns ``inf`` at or beyond the domain's upper end.

        Negative speeds are still an error. Useful when a bound asks for the
        power of a speed the processor cannot reach.
        """
        if s >= self.domain_upper:
            return math.inf
        return self.eval(s)

    def inverse(self, y: float) -> float:
        """Speed ``s`` with ``P(s) == y``."""
        p0 = self.eval(0.0)
        if not (y >= p0) or math.isinf(y):
            raise PowerDomainError(f"power {y!r} is not attained by {self} (P(0) = {p0})")
        if self.kind == POLYNOMIAL:
            return y ** (1.0 / self.alpha)
        return _PATH_UPPER - 0.25 * y**-4

    def derivative(self, s: float) -> float:
        self._check_speed(s)
        if self.kind == POLYNOMIAL:
            return self.alpha * s ** (self.alpha - 1.0)
        return self.eval(s) ** 5

    def to_dict(self) -> dict[str, Any]:
        if self.kind == POLYNOMIAL:
            return {"kind": POLYNOMIAL, "alpha": self.alpha}
        return {"kind": PATHOLOGICAL}

    def __str__(self) -> str:
        if self.kind == POLYNOMIAL:
            return f"s^{self.alpha:g}"
        return "(4(2-s))^(-1/4)"


def make_polynomial(alpha: float) -> PowerFunction:
    if not (isinstance(alpha, (int, float)) and math.isfinite(alpha) and alpha > 1):
        raise InvalidParameterError(f"alpha must be a finite real > 1, got {alpha!r}")
    return PowerFunction(POLYNOMIAL, float(alpha))


def make_pathological() -> PowerFunction:
    return PowerFunction(PATHOLOGICAL)


def from_dict(spec: dict[str, Any]) -> PowerFunction:
    """Build a power function from its config form.

    >>> from_dict({"kind": "polynomial", "alpha": 3.0})(2.0)
    8.0
    """
    kind = spec.get("kind")
    if kind == POLYNOMIAL:
        if "alpha" not in spec:
            raise ConfigurationError("polynomial power needs 'alpha'", "power.alpha")
        return make_polynomial(spec["alpha"])
    if kind == PATHOLOGICAL:
        return make_pathological()
    raise ConfigurationError(f"unknown power kind {kind!r}", "power.kind")
