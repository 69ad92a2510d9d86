"""Adaptive lower-bound adversary against nonclairvoyant speed scaling.

The adversary releases ``n = ceil(k P(v))`` jobs of hidden size at time 0 and
waits until the algorithm has put ``n`` units of work into some job. At that
moment ``T`` it looks at the algorithm's accumulated cost ``G(T)``:

* ``G(T) >= k n^3``: every job gets size ``n``; an offline schedule at speed 1
  costs at most ``2 n^3``.
* otherwise every job gets size ``q_i(T) + 1`` (one unit left for the
  algorithm on each job) and a stream of small jobs of size ``eps * v`` is
  released every ``eps`` for ``n^4`` time units. The offline schedule
  mirrors the algorithm up to ``T`` and then keeps up with the stream at
  speed ``v``, so it ends up far cheaper unless the algorithm overspeeds.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from .engine import CostSummary, Segment, SimOptions, Trace, replay, simulate
from .errors import InfeasibleScheduleError, InvalidParameterError
from .power import PowerFunction, make_pathological, make_polynomial
from .workload import OPEN, AdaptiveWorkload, Directives, JobSpec, Watch, WorkloadView

BIG_COST = "big-cost"
LAGGING = "lagging"


def _ceil(x: float) -> int:
    # n^4/eps is an exact integer for the default eps; don't let rounding bump it
    return math.ceil(x - 1e-9 * max(1.0, abs(x)))


@dataclass(frozen=True)
class Lemma3Params:
    k: float
    v: float
    power: PowerFunction
    epsilon: float | None = None

    def __post_init__(self):
        if not (self.k >= 1 and math.isfinite(self.k)):
            raise InvalidParameterError(f"k must be a finite real >= 1, got {self.k}")
        if not (self.v >= 1 and self.v < self.power.domain_upper):
            raise InvalidParameterError(f"v must be >= 1 inside the power domain, got {self.v}")
        if self.power.eval(self.v) < 1:
            raise InvalidParameterError(f"need P(v) >= 1, got P({self.v}) = {self.power.eval(self.v)}")
        limit = self.epsilon_limit
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", limit / 2)
        elif not (0 < self.epsilon < limit):
            raise InvalidParameterError(f"epsilon must lie in (0, {limit}), got {self.epsilon}")

    @property
    def n(self) -> int:
        return _ceil(self.k * self.power.eval(self.v))

    @property
    def epsilon_limit(self) -> float:
        """Strict upper bound ``1 / (n^5 v^2)`` on the small-job spacing."""
        return 1.0 / (self.n**5 * self.v**2)

    @property
    def stream_count(self) -> int:
        return _ceil(self.n**4 / self.epsilon)

    @property
    def small_size(self) -> float:
        return self.epsilon * self.v

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "v": self.v,
            "power": self.power.to_dict(),
            "epsilon": self.epsilon,
            "n": self.n,
            "stream_count": self.stream_count,
        }


def lemma3_opt_bound(params: Lemma3Params) -> float:
    """``k n^3 + 2 n^4 + n^4 P(v) + n + n P(1)``: upper bound on the offline cost (lagging branch)."""
    n, P = params.n, params.power
    return params.k * n**3 + 2 * n**4 + n**4 * P(params.v) + n + n * P(1.0)


def big_cost_opt_bound(params: Lemma3Params) -> float:
    """``2 n^3``: offline cost bound when every job is revealed to have size ``n``."""
    return 2.0 * params.n**3


class Lemma3Adversary(AdaptiveWorkload):
    """Single-use adaptive workload. Inspect the attributes after the run."""

    def __init__(self, params: Lemma3Params):
        self.params = params
        self.fired = False
        self.branch: str | None = None
        self.T: float | None = None
        self.trigger: int | None = None
        self.cost_at_T: float | None = None
        self.processed_at_T: dict[int, float] = {}
        self.sizes: dict[int, float] = {}
        self.stream_releases: list[float] = []

    def initial_jobs(self):
        return [JobSpec(i, 0.0, OPEN) for i in range(1, self.params.n + 1)]

    def watches(self, view: WorkloadView):
        if self.fired:
            return ()
        n = float(self.params.n)
        return tuple(Watch(j, n) for j in range(1, self.params.n + 1) if j in view.processed)

    def on_event(self, view: WorkloadView, fired) -> Directives:
        p = self.params
        n = p.n
        self.fired = True
        self.T = view.now
        self.trigger = min(w.job_id for w in fired)
        self.cost_at_T = view.cost
        self.processed_at_T = {j: view.processed[j] for j in range(1, n + 1)}
        if self.cost_at_T >= p.k * n**3:
            self.branch = BIG_COST
            self.sizes = {j: float(n) for j in range(1, n + 1)}
            return Directives(finalize=dict(self.sizes))
        self.branch = LAGGING
        self.sizes = {j: q + 1.0 for j, q in self.processed_at_T.items()}
        eps = p.epsilon
        self.stream_releases = [self.T + i * eps for i in range(p.stream_count)]
        return Directives(
            releases=[(r, p.small_size) for r in self.stream_releases],
            finalize=dict(self.sizes),
        )


def lemma3_adversary(params: Lemma3Params) -> Lemma3Adversary:
    return Lemma3Adversary(params)


@dataclass
class Lemma3Outcome:
    params: Lemma3Params
    branch: str
    T: float
    trigger: int
    cost_at_T: float
    processed_at_T: Mapping[int, float]
    sizes: Mapping[int, float]
    alg_trace: Trace
    alg_cost: CostSummary
    opt_bound: float
    opt_trace: Trace | None = None
    opt_cost: CostSummary | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def opt_reference(self) -> float:
        if self.opt_cost is None:
            return self.opt_bound
        return min(self.opt_bound, self.opt_cost.total)

    @property
    def ratio_lower(self) -> float:
        return self.alg_cost.total / self.opt_reference

    def to_dict(self) -> dict[str, Any]:
        return {
            "branch": self.branch,
            "T": self.T,
            "n": self.params.n,
            "k": self.params.k,
            "v": self.params.v,
            "epsilon": self.params.epsilon,
            "trigger": self.trigger,
            "G_T": self.cost_at_T,
            "sizes": [self.sizes[j] for j in sorted(self.sizes)],
            "alg_cost": self.alg_cost.to_dict(),
            "opt_bound": self.opt_bound,
            "opt_cost": None if self.opt_cost is None else self.opt_cost.to_dict(),
            "ratio_lower": self.ratio_lower,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_lemma3(params: Lemma3Params, policy, opts: SimOptions | None = None) -> Lemma3Outcome:
    """Run ``policy`` against the adversary and build the offline reference."""
    adv = Lemma3Adversary(params)
    alg = simulate(adv, policy, params.power, opts)
    if not adv.fired:
        raise InfeasibleScheduleError("adversary never triggered (run truncated before T)")
    out = Lemma3Outcome(
        params=params,
        branch=adv.branch,
        T=adv.T,
        trigger=adv.trigger,
        cost_at_T=adv.cost_at_T,
        processed_at_T=adv.processed_at_T,
        sizes=adv.sizes,
        alg_trace=alg,
        alg_cost=alg.cost(),
        opt_bound=lemma3_opt_bound(params) if adv.branch == LAGGING else big_cost_opt_bound(params),
    )
    if adv.branch == LAGGING:
        out.opt_trace = lemma3_opt_schedule(alg, params, out)
        out.opt_cost = out.opt_trace.cost()
        out.notes.append(
            "flow of small jobs the algorithm leaves unfinished is an analysis device and is not executed"
        )
    else:
        out.notes.append("big-cost branch: offline reference is the analytic bound 2n^3")
    return out


def _mirror_segments(alg: Trace, T: float, trigger: int, n: int) -> list[Segment]:
    """Mirror the algorithm on [0, T], handing the trigger job's work out one unit per job.

    Jobs other than the trigger receive their extra unit first (by id), the
    trigger job itself last, so it is left with ``n`` units at ``T``.
    """
    recipients = [j for j in range(1, n + 1) if j != trigger] + [trigger]
    need = [1.0] * len(recipients)
    r = 0
    segs: list[Segment] = []
    for iv in alg.intervals:
        if iv.t_start >= T:
            break
        a, b = iv.t_start, min(iv.t_end, T)
        base = {j: f for j, f in iv.allocation.items() if j != trigger}
        f_trig = iv.allocation.get(trigger, 0.0)
        rate = iv.speed * f_trig
        while a < b:
            if rate <= 0 or r >= len(recipients):
                # nothing (left) to hand out; any trigger residue past n units stays idle
                segs.append(Segment(a, b, iv.speed * sum(base.values()), _normalise(base)))
                break
            fill_end = a + need[r] / rate
            end = b if fill_end >= b else fill_end
            alloc = dict(base)
            alloc[recipients[r]] = alloc.get(recipients[r], 0.0) + f_trig
            segs.append(Segment(a, end, iv.speed, alloc))
            need[r] -= rate * (end - a)
            if end == fill_end or need[r] <= 1e-12:
                r += 1
            a = end
    return [s for s in segs if s.t_end > s.t_start and s.speed > 0]


def _normalise(alloc: dict[int, float]) -> dict[int, float]:
    total = sum(alloc.values())
    return {j: f / total for j, f in alloc.items()} if total > 0 else {}


def lemma3_opt_schedule(alg: Trace, params: Lemma3Params, outcome: Lemma3Outcome) -> Trace:
    """Explicit offline schedule for the lagging branch.

    * ``[0, T]``: same speed as the algorithm, same job shares, except that
      the trigger job's work is spread one unit per big job; all big jobs but
      the trigger finish by ``T``.
    * stream phase: speed ``v``, each small job finishes by the next release.
    * tail: speed 1 for ``n`` time units on the trigger job.
    """
    if outcome.branch != LAGGING:
        raise InvalidParameterError("offline schedule is only constructed in the lagging branch")
    n, T, trig = params.n, outcome.T, outcome.trigger
    segs = _mirror_segments(alg, T, trig, n)
    small = sorted((j for j in alg.jobs.values() if j.id > n), key=lambda j: (j.release, j.id))
    releases = [j.release for j in small] + [small[-1].release + params.epsilon]
    for i, job in enumerate(small):
        segs.append(Segment(releases[i], releases[i + 1], params.v, {job.id: 1.0}))
    tail_start = releases[-1]
    segs.append(Segment(tail_start, tail_start + n, 1.0, {trig: 1.0}))
    instance = alg.instance.with_sizes(outcome.sizes)
    trace = replay(instance, segs, params.power, label="lemma3-opt")
    for j in range(1, n + 1):
        if j != trig and trace.jobs[j].completion > T * (1 + 1e-12) + 1e-12:
            raise InfeasibleScheduleError(f"big job {j} not finished by T in the offline schedule")
    return trace


# -- parameterizations ---------------------------------------------------------


def theorem2_params(alpha: float, eps: float) -> Lemma3Params:
    """``k = alpha^(1/3 - eps)``, ``v = 1`` under ``P(s) = s^alpha``."""
    if not (0 < eps < 1.0 / 3.0):
        raise InvalidParameterError(f"eps must lie in (0, 1/3), got {eps}")
    power = make_polynomial(alpha)
    return Lemma3Params(k=alpha ** (1.0 / 3.0 - eps), v=1.0, power=power)


def theorem3_speed(k: float) -> float:
    """Speed ``v`` with ``P(v) = 16 k^4`` under the pathological power function."""
    if not k >= 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    target = 16.0 * k**4
    v = 2.0 - 0.25 * target**-4
    P = make_pathological()
    assert v >= 1 and P(v) >= target - 1e-6, (k, v)
    return v


def theorem3_params(k: float) -> Lemma3Params:
    return Lemma3Params(k=k, v=theorem3_speed(k), power=make_pathological())


def growth_check(power: PowerFunction, k: float, v: float) -> dict[str, Any]:
    """Evaluate ``P(v + d) / P(v)`` with ``d = 1 / (16 (k P(v))^3)``.

    For the pathological power function ``v + d`` always lies at or past the
    domain's upper end; ``ratio`` then uses the extended value ``P = inf``
    there (``beyond_domain`` is set). ``linearized`` is the first-order
    bound ``(P(v) + P'(v) d) / P(v)``, which stays inside the domain.
    """
    pv = power(v)
    d = 1.0 / (16.0 * (k * pv) ** 3)
    arg = v + d
    ratio = power.eval_extended(arg) / pv
    linearized = (pv + power.derivative(v) * d) / pv
    return {
        "k": k,
        "v": v,
        "P_v": pv,
        "step": d,
        "argument": arg,
        "beyond_domain": arg >= power.domain_upper,
        "ratio": ratio,
        "linearized": linearized,
    }
