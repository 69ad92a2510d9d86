"""Potential-function verifier for LAPS against a reference schedule.

With ``q_a``/``q_o`` the remaining work of a job in the algorithm's and the
reference schedule, and the algorithm's active jobs ``j_1..j_m`` ordered by
(release, id),

    Phi = gamma * sum_i  i^(1 - 1/alpha) * max(0, q_a(j_i) - q_o(j_i)),
    gamma = alpha * (1 + (1 + 3/alpha)^alpha).

Amortized local competitiveness with ``c = 4 alpha^3 (1 + (1 + 3/alpha)^alpha)``
needs four things: Phi starts and ends at 0, it does not jump up at arrivals
or completions, and between events ``dG_a/dt + dPhi/dt <= c dG_o/dt`` where
``G`` is accumulated flow plus energy. All four are checked here on exact
traces; dPhi/dt is evaluated analytically since every q is linear between
events.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

from ..engine import Snapshot, Trace
from ..errors import ConfigurationError, InputMismatchError, InvalidParameterError

EVENT_TOL = 1e-7
RUNNING_TOL = 1e-6
DEFAULT_SAMPLES = 16


@dataclass(frozen=True)
class PotentialParams:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise InvalidParameterError(f"alpha must be > 1, got {self.alpha}")

    @property
    def gamma(self) -> float:
        a = self.alpha
        return a * (1.0 + (1.0 + 3.0 / a) ** a)

    @property
    def c(self) -> float:
        a = self.alpha
        return 4.0 * a**3 * (1.0 + (1.0 + 3.0 / a) ** a)

    def coefficient(self, i: int) -> float:
        return i ** (1.0 - 1.0 / self.alpha)


def _check_same_jobs(a: Snapshot, o: Snapshot) -> None:
    if set(a.processed) != set(o.processed):
        only_a = sorted(set(a.processed) - set(o.processed))
        only_o = sorted(set(o.processed) - set(a.processed))
        raise InputMismatchError(f"snapshots disagree on released jobs: {only_a} vs {only_o}")


def potential(state_a: Snapshot, state_o: Snapshot, params: PotentialParams) -> float:
    _check_same_jobs(state_a, state_o)
    total = 0.0
    for i, jid in enumerate(state_a.active, start=1):
        lag = state_a.remaining[jid] - state_o.remaining.get(jid, 0.0)
        if lag > 0:
            total += params.coefficient(i) * lag
    return params.gamma * total


def check_traces(trace_a: Trace, trace_o: Trace) -> None:
    """Both traces must schedule the same jobs (ids, releases, sizes)."""
    ja, jo = trace_a.jobs, trace_o.jobs
    if set(ja) != set(jo):
        raise InputMismatchError(
            f"job universes differ: {sorted(set(ja) ^ set(jo))} present in only one trace"
        )
    for jid, rec in ja.items():
        other = jo[jid]
        if rec.release != other.release:
            raise InputMismatchError(f"job {jid}: release {rec.release} vs {other.release}")
        if not math.isclose(rec.size, other.size, rel_tol=1e-12):
            raise InputMismatchError(f"job {jid}: size {rec.size} vs {other.size}")


def _snap(trace: Trace, t: float, side: str) -> Snapshot:
    if t > trace.end:
        return trace.state_at(trace.end, "right")
    return trace.state_at(t, side)


# -- events ------------------------------------------------------------------------


@dataclass(frozen=True)
class EventJump:
    time: float
    kind: str
    source: str
    phi_before: float
    phi_after: float

    @property
    def delta(self) -> float:
        return self.phi_after - self.phi_before

    @property
    def ok(self) -> bool:
        return self.delta <= EVENT_TOL * max(1.0, self.phi_before)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["delta"] = self.delta
        d["ok"] = self.ok
        return d


def check_events(trace_a: Trace, trace_o: Trace, params: PotentialParams) -> list[EventJump]:
    """Jump of Phi across every arrival and completion of either schedule."""
    check_traces(trace_a, trace_o)
    seen: dict[tuple[float, str, str], None] = {}
    for source, tr in (("alg", trace_a), ("ref", trace_o)):
        for e in tr.events:
            if e.kind in ("arrival", "completion"):
                seen.setdefault((e.time, e.kind, source), None)
    jumps = []
    for t, kind, source in sorted(seen):
        before = potential(_snap(trace_a, t, "left"), _snap(trace_o, t, "left"), params)
        after = potential(_snap(trace_a, t, "right"), _snap(trace_o, t, "right"), params)
        jumps.append(EventJump(t, kind, source, before, after))
    return jumps


# -- running condition -----------------------------------------------------------------


@dataclass(frozen=True)
class RunningSample:
    time: float
    n_a: int
    s_a: float
    n_o: int
    s_o: float
    dphi: float
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs + RUNNING_TOL * max(1.0, self.rhs)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["slack"] = self.slack
        d["ok"] = self.ok
        return d


def _lag_derivative(x: float, slope: float, scale: float, side: str) -> float:
    """One-sided derivative of max(0, x(t)) for linear x."""
    tol = 1e-12 * max(1.0, scale)
    if x > tol:
        return slope
    if x < -tol:
        return 0.0
    if side == "right":
        return max(0.0, slope)
    # just before t the lag is positive iff it is decreasing
    return min(0.0, slope)


def check_running(
    trace_a: Trace,
    trace_o: Trace,
    params: PotentialParams,
    samples_per_interval: int = DEFAULT_SAMPLES,
    require_theorem1: bool = True,
) -> list[RunningSample]:
    """Sample ``dG_a/dt + dPhi/dt <= c dG_o/dt`` on the merged event grid.

    Each merged interval gets its two endpoints (one-sided limits), the
    requested number of evenly spaced interior points, and every point where
    some job's lag ``q_a - q_o`` changes sign together with the midpoints
    between those points, so every linear piece of Phi is visited.
    """
    check_traces(trace_a, trace_o)
    if require_theorem1:
        a = params.alpha
        pol = trace_a.policy
        if pol is None or not hasattr(pol, "is_laps") or not pol.is_laps(3.0 / a, 1.0 / (2.0 * a), a):
            raise ConfigurationError(
                f"running condition needs LAPS(3/alpha, 1/(2 alpha)) with alpha={a}, "
                f"trace was produced by {getattr(pol, 'name', pol)!r}"
            )
    power_a, power_o = trace_a.power, trace_o.power
    grid = sorted(
        {iv.t_start for iv in trace_a.intervals}
        | {iv.t_start for iv in trace_o.intervals}
        | {trace_a.end, trace_o.end}
    )
    c = params.c
    out: list[RunningSample] = []
    for u, w in zip(grid, grid[1:]):
        if not w > u:
            continue
        sa = _snap(trace_a, u, "right")
        so = _snap(trace_o, u, "right")
        n_a, n_o = len(sa.active), len(so.active)
        s_a = sa.speed if u < trace_a.end else 0.0
        s_o = so.speed if u < trace_o.end else 0.0
        g_a = n_a + power_a.eval(s_a)
        g_o = n_o + power_o.eval(s_o)
        terms = []
        for i, jid in enumerate(sa.active, start=1):
            x0 = sa.remaining[jid] - so.remaining.get(jid, 0.0)
            slope = -sa.rates.get(jid, 0.0) + so.rates.get(jid, 0.0)
            terms.append((params.coefficient(i), x0, slope, max(sa.remaining[jid], 1.0)))
        times = {u, w}
        times.update(u + (w - u) * (k + 1) / (samples_per_interval + 1) for k in range(samples_per_interval))
        kinks = sorted(
            u - x0 / slope for _, x0, slope, _ in terms if slope != 0 and u < u - x0 / slope < w
        )
        times.update(kinks)
        pts = [u, *kinks, w]
        times.update((p + q) / 2 for p, q in zip(pts, pts[1:]))
        for t in sorted(times):
            side = "left" if t == w else "right"
            dphi = params.gamma * sum(
                coef * _lag_derivative(x0 + slope * (t - u), slope, scale, side)
                for coef, x0, slope, scale in terms
            )
            out.append(RunningSample(t, n_a, s_a, n_o, s_o, dphi, g_a + dphi, c * g_o))
    return out


# -- full report ------------------------------------------------------------------------


@dataclass
class VerifierReport:
    alpha: float
    c: float
    boundary_ok: bool
    boundary: dict[str, float]
    event_jumps: list[EventJump]
    running_samples: list[RunningSample]
    min_phi: float
    failures: list[dict[str, Any]] = field(default_factory=list)

    @property
    def events_ok(self) -> bool:
        return all(j.ok for j in self.event_jumps)

    @property
    def running_ok(self) -> bool:
        return all(s.ok for s in self.running_samples)

    @property
    def ok(self) -> bool:
        return self.boundary_ok and self.events_ok and self.running_ok

    @property
    def max_violation(self) -> float:
        """Largest quantity that must be <= 0, reported even when negative."""
        vals = [abs(self.boundary["phi_start"]), abs(self.boundary["phi_end"]), -self.min_phi]
        vals += [j.delta for j in self.event_jumps]
        vals += [s.lhs - s.rhs for s in self.running_samples]
        return max(vals)

    @property
    def max_event_jump(self) -> float:
        return max((j.delta for j in self.event_jumps), default=0.0)

    @property
    def min_running_slack(self) -> float:
        return min((s.slack for s in self.running_samples), default=math.inf)

    def summary(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "c": self.c,
            "ok": self.ok,
            "boundary_ok": self.boundary_ok,
            "events_ok": self.events_ok,
            "running_ok": self.running_ok,
            "n_events": len(self.event_jumps),
            "n_samples": len(self.running_samples),
            "max_event_jump": self.max_event_jump,
            "min_running_slack": self.min_running_slack,
            "max_violation": self.max_violation,
        }

    def to_dict(self, full: bool = False) -> dict[str, Any]:
        d = self.summary()
        d["boundary"] = dict(self.boundary)
        d["failures"] = list(self.failures)
        if full:
            d["event_jumps"] = [j.to_dict() for j in self.event_jumps]
            d["running_samples"] = [s.to_dict() for s in self.running_samples]
        return d

    def to_json(self, full: bool = False) -> str:
        return json.dumps(self.to_dict(full), indent=2, sort_keys=True)


def _dump(snap: Snapshot) -> dict[str, Any]:
    return {
        "time": snap.time,
        "active": list(snap.active),
        "remaining": {str(k): v for k, v in snap.remaining.items()},
        "rates": {str(k): v for k, v in snap.rates.items()},
        "speed": snap.speed,
    }


def verify(
    trace_a: Trace,
    trace_o: Trace,
    params: PotentialParams | None = None,
    samples_per_interval: int = DEFAULT_SAMPLES,
    require_theorem1: bool = True,
) -> VerifierReport:
    """Check boundary, event and running conditions of Phi for one pair of traces."""
    if params is None:
        if not trace_a.power.is_polynomial:
            raise ConfigurationError("potential needs a polynomial power function")
        params = PotentialParams(trace_a.power.alpha)
    jumps = check_events(trace_a, trace_o, params)
    samples = check_running(trace_a, trace_o, params, samples_per_interval, require_theorem1)
    end = max(trace_a.end, trace_o.end)
    phi_start = potential(_snap(trace_a, 0.0, "left"), _snap(trace_o, 0.0, "left"), params)
    phi_end = potential(_snap(trace_a, end, "right"), _snap(trace_o, end, "right"), params)
    phis = [phi_start, phi_end] + [j.phi_before for j in jumps] + [j.phi_after for j in jumps]
    boundary_ok = phi_start == 0.0 and phi_end == 0.0 and min(phis) >= 0.0
    report = VerifierReport(
        alpha=params.alpha,
        c=params.c,
        boundary_ok=boundary_ok,
        boundary={"phi_start": phi_start, "phi_end": phi_end},
        event_jumps=jumps,
        running_samples=samples,
        min_phi=min(phis),
    )
    for j in jumps:
        if not j.ok:
            report.failures.append(
                {
                    "check": "event",
                    **j.to_dict(),
                    "alg_before": _dump(_snap(trace_a, j.time, "left")),
                    "ref_before": _dump(_snap(trace_o, j.time, "left")),
                    "alg_after": _dump(_snap(trace_a, j.time, "right")),
                    "ref_after": _dump(_snap(trace_o, j.time, "right")),
                }
            )
    for s in samples:
        if not s.ok:
            report.failures.append(
                {
                    "check": "running",
                    **s.to_dict(),
                    "alg": _dump(_snap(trace_a, s.time, "right")),
                    "ref": _dump(_snap(trace_o, s.time, "right")),
                }
            )
    return report
