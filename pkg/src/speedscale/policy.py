"""Scheduling policies as a speed rule composed with a job-selection rule.

A policy only sees a :class:`VisibleState`; for nonclairvoyant policies the
remaining work of every job is :data:`HIDDEN`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from .errors import ClairvoyanceError, ConfigurationError, InvalidParameterError
from .power import PowerFunction


class _Hidden:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "HIDDEN"


HIDDEN = _Hidden()


@dataclass(frozen=True)
class JobView:
    id: int
    release: float
    elapsed: float
    remaining: float | _Hidden = HIDDEN


@dataclass(frozen=True)
class VisibleState:
    now: float
    active: tuple[JobView, ...]
    clairvoyant: bool = False

    @property
    def n(self) -> int:
        return len(self.active)


@dataclass(frozen=True)
class Decision:
    speed: float
    allocation: Mapping[int, float] = field(default_factory=dict)

    def rate(self, job_id: int) -> float:
        return self.speed * self.allocation.get(job_id, 0.0)


IDLE = Decision(0.0, {})


def _order_key(j: JobView) -> tuple[float, int]:
    return (j.release, j.id)


# -- speed rules ---------------------------------------------------------------


@dataclass(frozen=True)
class LapsSpeed:
    """``(1 + delta) * n ** (1/alpha)``.

    Only meaningful together with ``P(s) = s**alpha`` for the same alpha.
    """

    delta: float
    alpha: float

    def __post_init__(self):
        # the default instantiation delta = 3/alpha exceeds 1 for alpha < 3, so only
        # positivity is enforced here.
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise InvalidParameterError(f"delta must be > 0, got {self.delta}")
        if not (math.isfinite(self.alpha) and self.alpha > 1):
            raise InvalidParameterError(f"alpha must be > 1, got {self.alpha}")

    def __call__(self, n: int) -> float:
        if n <= 0:
            return 0.0
        return (1.0 + self.delta) * n ** (1.0 / self.alpha)

    def check_power(self, power: PowerFunction) -> None:
        if not power.is_polynomial:
            raise ConfigurationError(
                f"LAPS speed rule is defined only for polynomial power, not {power}"
            )
        if abs(power.alpha - self.alpha) > 1e-12 * self.alpha:
            raise ConfigurationError(
                f"LAPS alpha={self.alpha} does not match power function {power}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {"rule": "laps", "delta": self.delta, "alpha": self.alpha}


@dataclass(frozen=True)
class PowerEqualsJobs:
    """Run at power ``n + offset`` while jobs are active."""

    power: PowerFunction
    offset: int = 0

    def __post_init__(self):
        if self.offset not in (0, 1):
            raise InvalidParameterError(f"offset must be 0 or 1, got {self.offset}")

    def __call__(self, n: int) -> float:
        if n <= 0:
            return 0.0
        return self.power.inverse(n + self.offset)

    def check_power(self, power: PowerFunction) -> None:
        if power != self.power:
            raise ConfigurationError(
                f"speed rule built for {self.power} but simulated under {power}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {"rule": "power_equals_jobs", "offset": self.offset}


@dataclass(frozen=True)
class FixedSpeed:
    speed: float

    def __post_init__(self):
        if not (math.isfinite(self.speed) and self.speed > 0):
            raise InvalidParameterError(f"fixed speed must be > 0, got {self.speed}")

    def __call__(self, n: int) -> float:
        return self.speed if n > 0 else 0.0

    def check_power(self, power: PowerFunction) -> None:
        pass

    def to_dict(self) -> dict[str, Any]:
        return {"rule": "fixed", "speed": self.speed}


def speed_laps(delta: float, alpha: float) -> LapsSpeed:
    return LapsSpeed(delta, alpha)


def speed_power_equals_jobs(power: PowerFunction, offset: int = 0) -> PowerEqualsJobs:
    return PowerEqualsJobs(power, offset)


def speed_fixed(speed: float) -> FixedSpeed:
    return FixedSpeed(speed)


# -- selection rules -----------------------------------------------------------


class Selection:
    requires_clairvoyance = False

    def __call__(self, state: VisibleState) -> tuple[int, ...]:
        raise NotImplementedError

    def horizon(self, state: VisibleState, decision: Decision) -> float:
        """Time until the selection would change with no arrival or completion."""
        return math.inf


@dataclass(frozen=True)
class LapsSelect(Selection):
    """The ceil(beta * n) latest-released active jobs, ties by larger id."""

    beta: float

    def __post_init__(self):
        if not (0 < self.beta <= 1):
            raise InvalidParameterError(f"beta must lie in (0, 1], got {self.beta}")

    def count(self, n: int) -> int:
        if n <= 0:
            return 0
        # guard ceil against products like 2.0000000000000004
        return min(n, math.ceil(self.beta * n - 1e-9))

    def __call__(self, state: VisibleState) -> tuple[int, ...]:
        k = self.count(state.n)
        if k == 0:
            return ()
        ordered = sorted(state.active, key=_order_key)
        return tuple(j.id for j in ordered[-k:])

    def to_dict(self) -> dict[str, Any]:
        return {"rule": "laps", "beta": self.beta}


@dataclass(frozen=True)
class RoundRobin(Selection):
    def __call__(self, state: VisibleState) -> tuple[int, ...]:
        return tuple(j.id for j in state.active)

    def to_dict(self) -> dict[str, Any]:
        return {"rule": "rr"}


# elapsed values closer than this (relative) count as tied under SETF
SETF_TIE = 1e-12


@dataclass(frozen=True)
class Setf(Selection):
    """Share equally among the jobs with the least elapsed processing."""

    def _least(self, state: VisibleState) -> tuple[float, tuple[int, ...]]:
        low = min(j.elapsed for j in state.active)
        tol = SETF_TIE * max(1.0, abs(low))
        return low, tuple(j.id for j in state.active if j.elapsed - low <= tol)

    def __call__(self, state: VisibleState) -> tuple[int, ...]:
        if not state.active:
            return ()
        return self._least(state)[1]

    def horizon(self, state: VisibleState, decision: Decision) -> float:
        if not state.active or decision.speed <= 0:
            return math.inf
        low, chosen = self._least(state)
        chosen_set = set(chosen)
        above = [j.elapsed for j in state.active if j.id not in chosen_set]
        if not above:
            return math.inf
        rate = decision.speed / len(chosen)
        return (min(above) - low) / rate

    def to_dict(self) -> dict[str, Any]:
        return {"rule": "setf"}


@dataclass(frozen=True)
class Srpt(Selection):
    """Single job with the least remaining work, ties to the smaller id."""

    requires_clairvoyance = True

    def __call__(self, state: VisibleState) -> tuple[int, ...]:
        if not state.active:
            return ()
        if any(j.remaining is HIDDEN for j in state.active):
            raise ClairvoyanceError("SRPT needs remaining work of every active job")
        best = min(state.active, key=lambda j: (j.remaining, j.id))
        return (best.id,)

    def to_dict(self) -> dict[str, Any]:
        return {"rule": "srpt"}


def select_laps(beta: float) -> LapsSelect:
    return LapsSelect(beta)


def select_rr() -> RoundRobin:
    return RoundRobin()


def select_setf() -> Setf:
    return Setf()


def select_srpt() -> Srpt:
    return Srpt()


# -- policies ------------------------------------------------------------------

SpeedRule = Callable[[int], float]


@dataclass(frozen=True)
class Policy:
    name: str
    speed_rule: Any
    selection: Selection

    @property
    def clairvoyant(self) -> bool:
        return self.selection.requires_clairvoyance

    def decide(self, state: VisibleState) -> Decision:
        if not state.active:
            return IDLE
        if self.clairvoyant and not state.clairvoyant:
            raise ClairvoyanceError(f"policy {self.name} needs a clairvoyant view")
        speed = self.speed_rule(state.n)
        chosen = self.selection(state)
        if speed <= 0 or not chosen:
            return Decision(0.0, {})
        share = 1.0 / len(chosen)
        return Decision(speed, {i: share for i in chosen})

    def next_change(self, state: VisibleState, decision: Decision) -> float:
        """Absolute time at which the decision changes absent arrivals/completions."""
        return state.now + self.selection.horizon(state, decision)

    def check_power(self, power: PowerFunction) -> None:
        self.speed_rule.check_power(power)

    def is_laps(self, delta: float, beta: float, alpha: float, rel: float = 1e-12) -> bool:
        """True when this is LAPS(delta, beta) for exponent alpha."""
        s, sel = self.speed_rule, self.selection
        return (
            isinstance(s, LapsSpeed)
            and isinstance(sel, LapsSelect)
            and math.isclose(s.delta, delta, rel_tol=rel)
            and math.isclose(sel.beta, beta, rel_tol=rel)
            and math.isclose(s.alpha, alpha, rel_tol=rel)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "speed": self.speed_rule.to_dict(),
            "selection": self.selection.to_dict(),
        }


def compose(speed_rule, selection: Selection, name: str) -> Policy:
    return Policy(name, speed_rule, selection)


def laps(delta: float, beta: float, alpha: float) -> Policy:
    return compose(LapsSpeed(delta, alpha), LapsSelect(beta), f"LAPS({delta:g},{beta:g})")


def laps_theorem1(alpha: float) -> Policy:
    """LAPS with delta = 3/alpha and beta = 1/(2 alpha)."""
    return laps(3.0 / alpha, 1.0 / (2.0 * alpha), alpha)


def srpt_power_jobs(power: PowerFunction, offset: int = 1) -> Policy:
    return compose(PowerEqualsJobs(power, offset), Srpt(), f"SRPT+P=n+{offset}")


def rr_power_jobs(power: PowerFunction, offset: int = 0) -> Policy:
    return compose(PowerEqualsJobs(power, offset), RoundRobin(), f"RR+P=n+{offset}")


def setf_power_jobs(power: PowerFunction, offset: int = 0) -> Policy:
    return compose(PowerEqualsJobs(power, offset), Setf(), f"SETF+P=n+{offset}")


def rr_fixed(speed: float) -> Policy:
    return compose(FixedSpeed(speed), RoundRobin(), f"RR@{speed:g}")


def from_dict(spec: Mapping[str, Any], power: PowerFunction, path: str = "policy") -> Policy:
    """Policy from its config form, e.g. ``{"policy": "laps", "delta": 1, "beta": 0.5, "alpha": 3}``."""
    kind = spec.get("policy")

    def alpha() -> float:
        if "alpha" in spec:
            return float(spec["alpha"])
        if power.is_polynomial:
            return power.alpha
        raise ConfigurationError("LAPS needs 'alpha' (power is not polynomial)", f"{path}.alpha")

    try:
        if kind == "laps":
            if "delta" not in spec and "beta" not in spec:
                return laps_theorem1(alpha())
            return laps(float(spec["delta"]), float(spec["beta"]), alpha())
        if kind == "laps_theorem1":
            return laps_theorem1(alpha())
        offset = int(spec.get("offset", 1 if kind == "srpt_power_jobs" else 0))
        if kind == "srpt_power_jobs":
            return srpt_power_jobs(power, offset)
        if kind == "rr_power_jobs":
            return rr_power_jobs(power, offset)
        if kind == "setf_power_jobs":
            return setf_power_jobs(power, offset)
        if kind == "rr_fixed":
            return rr_fixed(float(spec["speed"]))
    except KeyError as exc:
        raise ConfigurationError(f"missing field {exc.args[0]!r}", path) from None
    except InvalidParameterError as exc:
        raise ConfigurationError(str(exc), path) from None
    raise ConfigurationError(f"unknown policy {kind!r}", f"{path}.policy")
