"""Reference optimum for small instances and closed-form anchors.

The oracle fixes SRPT job selection and searches speed profiles that stay
constant between the schedule's own events (arrivals and completions). Each
such phase picks one speed from a finite geometric level set; the phase
vector is optimised by coordinate descent, coarse-to-fine over nested level
sets so that a finer level set can never return a worse schedule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..engine import Segment, Trace, replay
from ..errors import ConfigurationError, InvalidParameterError, SizeLimitError
from ..power import PowerFunction
from ..workload import Instance, is_open

MAX_JOBS = 5
MAX_WORK = 10.0
DEFAULT_LEVELS = 64
LOW_FACTOR = 0.1
HIGH_FACTOR = 4.0
COARSEST = 8


@dataclass(frozen=True)
class SingleJobOpt:
    speed: float
    cost: float


def single_job_opt(p: float, alpha: float) -> SingleJobOpt:
    """Best constant speed for one job of work ``p`` alone under ``s**alpha``."""
    if not (math.isfinite(p) and p > 0):
        raise InvalidParameterError(f"work must be > 0, got {p}")
    if not (math.isfinite(alpha) and alpha > 1):
        raise InvalidParameterError(f"alpha must be > 1, got {alpha}")
    s = (alpha - 1.0) ** (-1.0 / alpha)
    return SingleJobOpt(s, p * (1.0 / s + s ** (alpha - 1.0)))


@dataclass(frozen=True)
class OracleGrid:
    """Speed levels available to each phase (increasing, positive)."""

    levels: tuple[float, ...]

    def __post_init__(self):
        if not self.levels:
            raise InvalidParameterError("oracle grid needs at least one speed level")
        if any(not (math.isfinite(s) and s > 0) for s in self.levels):
            raise InvalidParameterError("speed levels must be finite and > 0")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise InvalidParameterError("speed levels must be strictly increasing")

    def refined(self) -> "OracleGrid":
        """Insert the geometric midpoint between neighbouring levels."""
        out: list[float] = []
        for a, b in zip(self.levels, self.levels[1:]):
            out += [a, math.sqrt(a * b)]
        out.append(self.levels[-1])
        return OracleGrid(tuple(out))

    def coarsened(self) -> "OracleGrid":
        return OracleGrid(self.levels[::2])


def default_grid(power: PowerFunction, count: int = DEFAULT_LEVELS) -> OracleGrid:
    """``count`` geometric levels over [0.1 s*, 4 s*] with s* itself a level."""
    if not power.is_polynomial:
        raise ConfigurationError("default oracle grid needs a polynomial power function")
    if count < 2:
        raise InvalidParameterError(f"need at least 2 levels, got {count}")
    s_star = single_job_opt(1.0, power.alpha).speed
    ratio = (HIGH_FACTOR / LOW_FACTOR) ** (1.0 / (count - 1))
    # index of s* so that the ends stay as close as possible to 0.1 s* and 4 s*
    below = round(math.log(1.0 / LOW_FACTOR) / math.log(ratio))
    return OracleGrid(tuple(s_star * ratio ** (i - below) for i in range(count)))


@dataclass(frozen=True)
class OracleResult:
    cost: float
    trace: Trace
    speeds: tuple[float, ...]
    grid: OracleGrid


class _Evaluator:
    """Cost of SRPT with one speed per phase, in closed form."""

    def __init__(self, instance: Instance, power: PowerFunction):
        self.jobs = [(j.release, j.id, float(j.size)) for j in instance.jobs]
        self.power = power
        self.phases = 2 * len(self.jobs)

    def run(self, speeds: list[float], record: bool = False):
        jobs, P = self.jobs, self.power.eval
        idle_power = P(0.0)
        t, k, phase = 0.0, 0, 0
        active: dict[int, float] = {}
        flow = energy = 0.0
        segs: list[Segment] = []
        nj = len(jobs)
        while k < nj or active:
            while k < nj and jobs[k][0] <= t:
                active[jobs[k][1]] = jobs[k][2]
                k += 1
            if not active:
                nxt = jobs[k][0]
                energy += idle_power * (nxt - t)
                t = nxt
                continue
            s = speeds[phase]
            phase += 1
            n = len(active)
            jid = min(active, key=lambda i: (active[i], i))
            finish = t + active[jid] / s
            nxt = jobs[k][0] if k < nj else math.inf
            if nxt < finish:
                t1 = nxt
                active[jid] -= s * (t1 - t)
            else:
                t1 = finish
                del active[jid]
            dt = t1 - t
            flow += n * dt
            energy += P(s) * dt
            if record:
                segs.append(Segment(t, t1, s, {jid: 1.0}))
            t = t1
        return flow + energy, segs


def _descend(ev: _Evaluator, levels, x: list[int], best: float, span: int | None):
    """Coordinate descent over level indices; ``span`` limits each move."""
    L = len(levels)
    improved = True
    while improved:
        improved = False
        for p in range(len(x)):
            lo, hi = (0, L) if span is None else (max(0, x[p] - span), min(L, x[p] + span + 1))
            for l in range(lo, hi):
                if l == x[p]:
                    continue
                y = x.copy()
                y[p] = l
                c, _ = ev.run([levels[i] for i in y])
                if c < best:
                    x, best, improved = y, c, True
    return x, best


def _solve(ev: _Evaluator, grid: OracleGrid) -> tuple[list[int], float]:
    levels = grid.levels
    if len(levels) > COARSEST:
        coarse_x, coarse_best = _solve(ev, grid.coarsened())
        # coarse level i sits at fine index 2i
        x = [2 * i for i in coarse_x]
        return _descend(ev, levels, x, coarse_best, span=2)
    # coarsest: every constant profile as a start, then full coordinate scans
    best_x, best = None, math.inf
    for l in range(len(levels)):
        x = [l] * ev.phases
        c, _ = ev.run([levels[l]] * ev.phases)
        if c < best:
            best_x, best = x, c
    return _descend(ev, levels, best_x, best, span=None)


def oracle_opt(
    instance: Instance, power: PowerFunction, grid: OracleGrid | None = None
) -> OracleResult:
    """Near-optimal schedule for a small instance under SRPT selection."""
    if any(is_open(j.size) for j in instance.jobs):
        raise InvalidParameterError("oracle needs finalized job sizes")
    if len(instance.jobs) > MAX_JOBS:
        raise SizeLimitError(f"oracle handles at most {MAX_JOBS} jobs, got {len(instance.jobs)}")
    if instance.total_work > MAX_WORK:
        raise SizeLimitError(f"oracle handles total work <= {MAX_WORK}, got {instance.total_work}")
    if grid is None:
        grid = default_grid(power)
    if not instance.jobs:
        return OracleResult(0.0, replay(instance, [], power, label="oracle"), (), grid)
    ev = _Evaluator(instance, power)
    x, best = _solve(ev, grid)
    speeds = [grid.levels[i] for i in x]
    _, segs = ev.run(speeds, record=True)
    trace = replay(instance, segs, power, label="oracle")
    used = tuple(speeds[: len(segs)])
    return OracleResult(trace.cost().total, trace, used, grid)
