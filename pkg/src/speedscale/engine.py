"""Event-driven continuous-time simulation with exact cost accounting.

Between consecutive events (arrival, completion, adaptive watch crossing,
or a policy-declared decision change) the speed and the allocation are
constant, so processed work is linear in time and flow/energy accumulate
in closed form. Nothing is integrated numerically.
"""
from __future__ import annotations

import bisect
import csv
import heapq
import io
import json
import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    ClairvoyanceError,
    DivergenceError,
    InfeasibleScheduleError,
    InvalidParameterError,
    StallError,
    TimeDomainError,
)
from .policy import IDLE, HIDDEN, Decision, JobView, VisibleState
from .power import PowerFunction
from .workload import (
    AdaptiveWorkload,
    Directives,
    Instance,
    JobSpec,
    Watch,
    WorkloadView,
    is_open,
)

log = logging.getLogger(__name__)

# remaining work below this is treated as done
COMPLETION_TOL = 1e-12
# candidate event times this close (relative) are merged
TIME_TOL = 1e-12
ARRIVAL, COMPLETION, ADAPTIVE = "arrival", "completion", "adaptive"


@dataclass(frozen=True)
class Interval:
    t_start: float
    t_end: float
    active: tuple[int, ...]
    speed: float
    allocation: Mapping[int, float]
    start_work: Mapping[int, float]
    power: float

    @property
    def length(self) -> float:
        return self.t_end - self.t_start

    @property
    def n_active(self) -> int:
        return len(self.active)

    def rate(self, job_id: int) -> float:
        return self.speed * self.allocation.get(job_id, 0.0)

    def work_at(self, job_id: int, t: float) -> float:
        return self.start_work[job_id] + self.rate(job_id) * (t - self.t_start)


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    jobs: tuple[int, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"time": self.time, "kind": self.kind, "jobs": list(self.jobs)}


@dataclass(frozen=True)
class JobRecord:
    id: int
    release: float
    size: Any
    completion: float | None

    @property
    def flow(self) -> float | None:
        return None if self.completion is None else self.completion - self.release


@dataclass(frozen=True)
class CostSummary:
    total_flow: float
    total_energy: float
    total: float
    per_job_flow: Mapping[int, float]
    flow_integral: float

    def to_dict(self) -> dict[str, float]:
        return {"flow": self.total_flow, "energy": self.total_energy, "total": self.total}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class Snapshot:
    """Exact schedule state at one instant.

    ``processed``/``remaining`` cover every job released by ``time``;
    ``active`` is sorted by (release, id).
    """

    time: float
    active: tuple[int, ...]
    processed: Mapping[int, float]
    remaining: Mapping[int, float]
    flow: float
    energy: float
    speed: float
    rates: Mapping[int, float]

    @property
    def cost(self) -> float:
        return self.flow + self.energy


@dataclass
class Trace:
    intervals: list[Interval]
    events: list[Event]
    jobs: dict[int, JobRecord]
    power: PowerFunction
    policy: Any = None
    truncated: bool = False
    label: str = ""

    def __post_init__(self):
        self._starts = [iv.t_start for iv in self.intervals]
        self._cum_flow = [0.0]
        self._cum_energy = [0.0]
        for iv in self.intervals:
            self._cum_flow.append(self._cum_flow[-1] + iv.n_active * iv.length)
            self._cum_energy.append(self._cum_energy[-1] + iv.power * iv.length)
        self._release_order = sorted(self.jobs.values(), key=lambda j: (j.release, j.id))

    @property
    def end(self) -> float:
        return self.intervals[-1].t_end if self.intervals else 0.0

    @property
    def instance(self) -> Instance:
        return Instance(tuple(JobSpec(j.id, j.release, j.size) for j in self.jobs.values()))

    def event_times(self) -> list[float]:
        return sorted({e.time for e in self.events})

    # -- cost --------------------------------------------------------------
    def cost(self, up_to: float | None = None) -> CostSummary:
        """Flow and energy accumulated on ``[0, up_to]`` (whole trace by default).

        Flow is computed twice, from per-job flows and from the integral of
        the active count, and ``total`` uses the per-job sum.
        """
        end = self.end
        t = end if up_to is None or up_to >= end else max(0.0, up_to)
        flow_int, energy = self._accumulated(t)
        per_job: dict[int, float] = {}
        for j in self._release_order:
            if j.release > t:
                continue
            if j.completion is not None and j.completion <= t:
                per_job[j.id] = j.completion - j.release
            else:
                per_job[j.id] = t - j.release
        flow = math.fsum(per_job.values())
        return CostSummary(flow, energy, flow + energy, per_job, flow_int)

    def _accumulated(self, t: float) -> tuple[float, float]:
        if not self.intervals or t <= 0:
            return 0.0, 0.0
        k = bisect.bisect_right(self._starts, t) - 1
        iv = self.intervals[k]
        dt = min(t, iv.t_end) - iv.t_start
        return (
            self._cum_flow[k] + iv.n_active * dt,
            self._cum_energy[k] + iv.power * dt,
        )

    # -- state queries -----------------------------------------------------
    def _locate(self, t: float, side: str) -> int | None:
        if not self.intervals:
            return None
        if side == "right":
            k = bisect.bisect_right(self._starts, t) - 1
            if k < 0 or t >= self.end:
                return None
            return k
        k = bisect.bisect_left(self._starts, t) - 1
        return k if k >= 0 else None

    def state_at(self, t: float, side: str = "right") -> Snapshot:
        """State at ``t``; ``side="left"`` gives the limit just before events at ``t``."""
        if t < 0 or t > self.end:
            raise TimeDomainError(f"time {t} outside trace [0, {self.end}]")
        k = self._locate(t, side)
        iv = self.intervals[k] if k is not None else None
        processed: dict[int, float] = {}
        remaining: dict[int, float] = {}
        for j in self._release_order:
            if j.release > t or (side == "left" and j.release == t):
                break
            if iv is not None and j.id in iv.start_work:
                w = iv.work_at(j.id, t)
            elif j.completion is not None and j.completion <= t:
                w = j.size
            else:
                # released but idle through the whole enclosing interval: not possible
                # unless t is the trace end and the job is unfinished
                w = self._final_work(j.id)
            processed[j.id] = w
            remaining[j.id] = math.inf if is_open(j.size) else max(0.0, j.size - w)
        if iv is not None:
            active = iv.active
            speed = iv.speed
            rates = {i: iv.rate(i) for i in iv.active}
        else:
            active = tuple(
                j.id
                for j in self._release_order
                if j.id in processed and (j.completion is None or j.completion > t)
            )
            speed, rates = 0.0, {}
        flow, energy = self._accumulated(t)
        return Snapshot(t, active, processed, remaining, flow, energy, speed, rates)

    def _final_work(self, job_id: int) -> float:
        for iv in reversed(self.intervals):
            if job_id in iv.start_work:
                return iv.work_at(job_id, iv.t_end)
        return 0.0

    def work_done(self, job_id: int) -> float:
        return math.fsum(iv.rate(job_id) * iv.length for iv in self.intervals if job_id in iv.allocation)

    # -- invariants ----------------------------------------------------------
    def check(self, rel: float = 1e-9) -> list[str]:
        """Violations of the trace invariants (tiling, work conservation, flow identity)."""
        bad = []
        prev_end = 0.0
        for k, iv in enumerate(self.intervals):
            if iv.t_start != prev_end:
                bad.append(f"interval {k} starts at {iv.t_start}, previous ended at {prev_end}")
            if not iv.t_end > iv.t_start:
                bad.append(f"interval {k} is empty [{iv.t_start}, {iv.t_end})")
            if set(iv.allocation) - set(iv.active):
                bad.append(f"interval {k} allocates to inactive jobs")
            total = sum(iv.allocation.values())
            if iv.speed > 0 and abs(total - 1.0) > 1e-9:
                bad.append(f"interval {k} allocation sums to {total}")
            prev_end = iv.t_end
        boundaries = {0.0, self.end}
        boundaries.update(iv.t_start for iv in self.intervals)
        for e in self.events:
            if e.time not in boundaries:
                bad.append(f"{e.kind} event at {e.time} falls inside an interval")
        for j in self.jobs.values():
            if j.completion is None or is_open(j.size):
                continue
            done = self.work_done(j.id)
            if abs(done - j.size) > rel * max(j.size, 1e-300):
                bad.append(f"job {j.id}: processed {done!r} != size {j.size!r}")
        c = self.cost()
        if abs(c.total_flow - c.flow_integral) > rel * max(1.0, c.total_flow):
            bad.append(f"flow identity: sum F(j)={c.total_flow!r} vs integral={c.flow_integral!r}")
        return bad

    # -- export --------------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t_start", "t_end", "n_active", "speed", "energy_rate"])
        for iv in self.intervals:
            w.writerow([repr(iv.t_start), repr(iv.t_end), iv.n_active, repr(iv.speed), repr(iv.power)])
        return buf.getvalue()

    def events_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.events], indent=1)


def cost(trace: Trace, up_to: float | None = None) -> CostSummary:
    return trace.cost(up_to)


def state_at(trace: Trace, t: float, side: str = "right") -> Snapshot:
    return trace.state_at(t, side)


# -- simulation ---------------------------------------------------------------


@dataclass
class SimOptions:
    max_events: int = 10**7
    max_time: float = math.inf


@dataclass
class _Job:
    id: int
    release: float
    size: Any
    processed: float = 0.0
    completion: float | None = None

    def remaining(self) -> float:
        return math.inf if is_open(self.size) else self.size - self.processed


def next_event(
    now: float,
    jobs: Mapping[int, _Job],
    decision: Decision,
    next_arrival: float = math.inf,
    watches: Sequence[Watch] = (),
    policy_change: float = math.inf,
) -> float:
    """Absolute time of the next event for constant rates starting at ``now``.

    Returns ``inf`` when nothing can happen (no arrivals, no depletable
    allocated job, no reachable watch).
    """
    t_next = min(next_arrival, policy_change)
    for jid, frac in decision.allocation.items():
        rate = decision.speed * frac
        job = jobs[jid]
        if rate > 0 and not is_open(job.size):
            t_next = min(t_next, now + max(0.0, job.remaining()) / rate)
    for w in watches:
        rate = decision.rate(w.job_id)
        if rate > 0:
            t_next = min(t_next, now + max(0.0, w.threshold - jobs[w.job_id].processed) / rate)
    return t_next


class _Simulator:
    def __init__(self, workload, policy, power: PowerFunction, opts: SimOptions, label: str):
        self.policy = policy
        self.power = power
        self.opts = opts
        self.label = label
        self.adaptive: AdaptiveWorkload | None = None
        if isinstance(workload, AdaptiveWorkload):
            self.adaptive = workload
            initial = list(workload.initial_jobs())
        elif isinstance(workload, Instance):
            initial = list(workload.jobs)
        else:
            raise InvalidParameterError(f"unsupported workload {type(workload).__name__}")
        policy.check_power(power)
        if policy.clairvoyant and any(is_open(j.size) for j in initial):
            raise ClairvoyanceError(
                f"clairvoyant policy {policy.name} cannot run on jobs with OPEN sizes"
            )
        self.jobs: dict[int, _Job] = {}
        self.pending: list[tuple[float, int]] = []
        self.last_release = -math.inf
        self.next_id = 1
        for spec in initial:
            self._schedule(spec.id, spec.release, spec.size)
        self.active: list[int] = []
        self.intervals: list[Interval] = []
        self.events: list[Event] = []
        self.flow = 0.0
        self.energy = 0.0
        self.watches: Sequence[Watch] = ()

    def _schedule(self, jid: int, release: float, size) -> None:
        if jid in self.jobs:
            raise InvalidParameterError(f"duplicate job id {jid}")
        self.jobs[jid] = _Job(jid, release, size)
        heapq.heappush(self.pending, (release, jid))
        self.next_id = max(self.next_id, jid + 1)
        self.last_release = max(self.last_release, release)

    def _view(self, now: float) -> WorkloadView:
        processed = {jid: self.jobs[jid].processed for jid in self.active}
        return WorkloadView(
            now=now,
            active=tuple(self.active),
            processed=MappingProxyType(processed),
            releases=MappingProxyType({j.id: j.release for j in self.jobs.values() if j.release <= now}),
            flow=self.flow,
            energy=self.energy,
        )

    def _complete_finished(self, now: float) -> None:
        done = []
        for jid in self.active:
            job = self.jobs[jid]
            if not is_open(job.size) and job.size - job.processed <= COMPLETION_TOL:
                job.processed = job.size
                job.completion = now
                done.append(jid)
        if done:
            gone = set(done)
            self.active = [j for j in self.active if j not in gone]
            self.events.append(Event(now, COMPLETION, tuple(done)))

    def _reached(self, w: Watch) -> bool:
        job = self.jobs.get(w.job_id)
        return job is not None and job.processed >= w.threshold - COMPLETION_TOL * max(1.0, w.threshold)

    def _adaptive_step(self, now: float) -> None:
        if self.adaptive is None or not self.watches:
            return
        fired = [w for w in self.watches if self._reached(w)]
        if not fired:
            return
        directives = self.adaptive.on_event(self._view(now), fired) or Directives()
        self.events.append(Event(now, ADAPTIVE, tuple(sorted({w.job_id for w in fired}))))
        self._apply(now, directives)
        self._complete_finished(now)

    def _apply(self, now: float, d: Directives) -> None:
        for jid, size in sorted(d.finalize.items()):
            job = self.jobs.get(jid)
            if job is None or not is_open(job.size):
                raise InvalidParameterError(f"job {jid} is not an OPEN job and cannot be finalized")
            if not (math.isfinite(size) and size > 0):
                raise InvalidParameterError(f"finalized size {size!r} for job {jid} must be finite > 0")
            if size < job.processed - COMPLETION_TOL * max(1.0, size):
                raise InvalidParameterError(
                    f"job {jid} finalized to {size!r} below processed work {job.processed!r}"
                )
            job.size = float(size)
        for release, size in d.releases:
            if release < now:
                raise InvalidParameterError(f"cannot release a job in the past ({release} < {now})")
            if release < self.last_release:
                raise InvalidParameterError("adaptive releases must be in nondecreasing time order")
            if is_open(size) and self.policy.clairvoyant:
                raise ClairvoyanceError("OPEN job released to a clairvoyant policy")
            self._schedule(self.next_id, release, size)

    def _arrivals(self, now: float) -> None:
        arrived = []
        while self.pending and self.pending[0][0] <= now:
            _, jid = heapq.heappop(self.pending)
            arrived.append(jid)
        if arrived:
            self.active.extend(arrived)
            self.active.sort(key=lambda j: (self.jobs[j].release, j))
            self.events.append(Event(now, ARRIVAL, tuple(arrived)))

    def _visible(self, now: float) -> VisibleState:
        clair = self.policy.clairvoyant
        views = tuple(
            JobView(
                jid,
                self.jobs[jid].release,
                self.jobs[jid].processed,
                self.jobs[jid].remaining() if clair else HIDDEN,
            )
            for jid in self.active
        )
        return VisibleState(now, views, clair)

    def _check_decision(self, d: Decision) -> None:
        if not d.speed >= 0:
            raise InvalidParameterError(f"negative speed {d.speed!r}")
        self.power.eval(d.speed)  # domain check
        if d.speed > 0:
            extra = set(d.allocation) - set(self.active)
            if extra:
                raise InvalidParameterError(f"allocation to inactive jobs {sorted(extra)}")
            total = sum(d.allocation.values())
            if abs(total - 1.0) > 1e-9 or any(f < 0 or f > 1 for f in d.allocation.values()):
                raise InvalidParameterError(f"allocation fractions must form a simplex, got {dict(d.allocation)}")

    def run(self) -> Trace:
        now = 0.0
        truncated = False
        steps = 0
        max_time = self.opts.max_time
        while True:
            steps += 1
            if steps > self.opts.max_events:
                raise DivergenceError(f"more than {self.opts.max_events} events")
            self._complete_finished(now)
            self._adaptive_step(now)
            self._arrivals(now)
            if not self.active and not self.pending:
                break
            if now >= max_time:
                truncated = True
                break
            state = self._visible(now)
            decision = self.policy.decide(state) if self.active else IDLE
            self._check_decision(decision)
            if self.adaptive is not None:
                self.watches = tuple(self.adaptive.watches(self._view(now)))
                if any(self._reached(w) for w in self.watches):
                    # a fresh watch is already satisfied: fire it at this same instant
                    continue
            next_arrival = self.pending[0][0] if self.pending else math.inf
            change = self.policy.next_change(state, decision) if self.active else math.inf
            computed = next_event(now, self.jobs, decision, math.inf, self.watches)
            anchored = min(next_arrival, change, max_time)
            t_next = min(computed, anchored)
            if math.isinf(t_next):
                raise StallError(self._stall_message(now, decision))
            # snap to an exact anchored time when a computed event lands within rounding of it
            if anchored <= t_next + TIME_TOL * max(1.0, abs(t_next)):
                t_next = anchored
            if not t_next > now:
                t_next = math.nextafter(now, math.inf)
            self._advance(now, t_next, decision)
            now = t_next
        jobs = {
            j.id: JobRecord(j.id, j.release, j.size, j.completion) for j in self.jobs.values()
        }
        return Trace(self.intervals, self.events, jobs, self.power, self.policy, truncated, self.label)

    def _advance(self, t0: float, t1: float, d: Decision) -> None:
        dt = t1 - t0
        alloc = {jid: f for jid, f in d.allocation.items() if f > 0} if d.speed > 0 else {}
        speed = d.speed if alloc else 0.0
        start = {jid: self.jobs[jid].processed for jid in self.active}
        iv = Interval(t0, t1, tuple(self.active), speed, alloc, start, self.power.eval(speed))
        self.intervals.append(iv)
        self.flow += iv.n_active * dt
        self.energy += iv.power * dt
        crossing = {}
        for w in self.watches:
            rate = iv.rate(w.job_id)
            if rate > 0:
                crossing[w] = t0 + (w.threshold - start[w.job_id]) / rate
        for jid, frac in alloc.items():
            self.jobs[jid].processed += speed * frac * dt
        # watch crossings that define t1 land exactly on their threshold
        for w, tc in crossing.items():
            if abs(tc - t1) <= TIME_TOL * max(1.0, abs(t1)):
                job = self.jobs[w.job_id]
                job.processed = max(job.processed, w.threshold)

    def _stall_message(self, now: float, d: Decision) -> str:
        open_jobs = [j for j in self.active if is_open(self.jobs[j].size)]
        if open_jobs:
            return (
                f"stalled at t={now}: only OPEN jobs {open_jobs} remain and no watch is reachable "
                f"at speed {d.speed}; set max_time to truncate"
            )
        return f"stalled at t={now}: speed {d.speed} with active jobs {self.active}"


def simulate(
    workload: Instance | AdaptiveWorkload,
    policy,
    power: PowerFunction,
    opts: SimOptions | None = None,
    label: str = "",
) -> Trace:
    """Run ``policy`` on ``workload`` under ``power`` and return the exact trace.

    Equal-timestamp events are processed as completions, adaptive
    directives, arrivals, then a fresh policy decision.
    """
    return _Simulator(workload, policy, power, opts or SimOptions(), label or getattr(policy, "name", "")).run()


# -- explicit schedules -----------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    speed: float
    allocation: Mapping[int, float]


@dataclass(frozen=True)
class ScriptedPolicy:
    """Replays a fixed, time-indexed schedule through the engine.

    A job that finishes inside a segment drops out and the segment's speed
    shrinks by that job's share, so surplus allocation is never spent.
    """

    segments: tuple[Segment, ...]
    name: str = "scripted"
    clairvoyant: bool = False
    starts: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: s.t_start))
        for a, b in zip(segs, segs[1:]):
            if b.t_start < a.t_end:
                raise InfeasibleScheduleError(f"segments overlap at {b.t_start}")
        for s in segs:
            if not s.t_end > s.t_start or s.speed < 0:
                raise InfeasibleScheduleError(f"bad segment {s}")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "starts", tuple(s.t_start for s in segs))

    def _segment(self, t: float) -> tuple[Segment | None, float]:
        k = bisect.bisect_right(self.starts, t) - 1
        if k >= 0 and t < self.segments[k].t_end:
            return self.segments[k], self.segments[k].t_end
        nxt = self.starts[k + 1] if k + 1 < len(self.starts) else math.inf
        return None, nxt

    def decide(self, state: VisibleState) -> Decision:
        seg, _ = self._segment(state.now)
        if seg is None or seg.speed == 0:
            return IDLE
        active = {j.id for j in state.active}
        live = {}
        for jid, frac in seg.allocation.items():
            if frac <= 0:
                continue
            if jid in active:
                live[jid] = frac
        share = sum(live.values())
        if share <= 0:
            return IDLE
        return Decision(seg.speed * share, {j: f / share for j, f in live.items()})

    def next_change(self, state: VisibleState, decision: Decision) -> float:
        return self._segment(state.now)[1]

    def check_power(self, power: PowerFunction) -> None:
        pass

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "segments": len(self.segments)}


def replay(
    instance: Instance,
    segments: Iterable[Segment],
    power: PowerFunction,
    label: str = "scripted",
    require_complete: bool = True,
) -> Trace:
    """Trace of an explicit schedule, checked for feasibility.

    Allocating work to a job before its release is an error; so is leaving
    a job unfinished when ``require_complete`` is set.
    """
    segs = tuple(segments)
    releases = {j.id: j.release for j in instance.jobs}
    for s in segs:
        for jid, frac in s.allocation.items():
            if frac > 0 and s.speed > 0:
                if jid not in releases:
                    raise InfeasibleScheduleError(f"segment allocates unknown job {jid}")
                if releases[jid] > s.t_start + TIME_TOL * max(1.0, s.t_start):
                    raise InfeasibleScheduleError(
                        f"job {jid} scheduled at {s.t_start} before its release {releases[jid]}"
                    )
    policy = ScriptedPolicy(segs, label)
    end = max((s.t_end for s in segs), default=0.0)
    try:
        trace = simulate(instance, policy, power, SimOptions(max_time=end), label)
    except StallError as exc:
        raise InfeasibleScheduleError(f"schedule leaves work unfinished: {exc}") from None
    if require_complete:
        left = [j.id for j in trace.jobs.values() if j.completion is None]
        if left:
            raise InfeasibleScheduleError(f"jobs {left} unfinished at end of schedule")
    return trace
