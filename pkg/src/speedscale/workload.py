"""Job instances: static batches and streams, plus the adaptive-workload protocol."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import InvalidParameterError


class _Open:
    """Marker for a job size the adversary has not revealed yet."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "OPEN"

    def __reduce__(self):
        return (_Open, ())


OPEN = _Open()


def is_open(size) -> bool:
    return size is OPEN


@dataclass(frozen=True)
class JobSpec:
    id: int
    release: float
    size: float | _Open

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "release": self.release,
            "size": "open" if is_open(self.size) else self.size,
        }


def _sort_key(job: JobSpec) -> tuple[float, int]:
    return (job.release, job.id)


@dataclass(frozen=True)
class Instance:
    """Jobs sorted by ``(release, id)``. Immutable."""

    jobs: tuple[JobSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(sorted(self.jobs, key=_sort_key)))

    def __len__(self) -> int:
        return len(self.jobs)

    def __iter__(self):
        return iter(self.jobs)

    @property
    def total_work(self) -> float:
        if any(is_open(j.size) for j in self.jobs):
            return math.inf
        return math.fsum(j.size for j in self.jobs)

    @property
    def has_open(self) -> bool:
        return any(is_open(j.size) for j in self.jobs)

    def by_id(self) -> dict[int, JobSpec]:
        return {j.id: j for j in self.jobs}

    def with_sizes(self, sizes: Mapping[int, float]) -> Instance:
        """Copy with some sizes replaced (used when OPEN sizes get revealed)."""
        return Instance(
            tuple(JobSpec(j.id, j.release, sizes.get(j.id, j.size)) for j in self.jobs)
        )

    # -- serialization -------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"jobs": [j.to_dict() for j in self.jobs]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> Instance:
        doc = json.loads(text)
        jobs = []
        for raw in doc["jobs"]:
            size = raw["size"]
            if isinstance(size, str):
                if size.lower() != "open":
                    raise InvalidParameterError(f"bad size {size!r}")
                size = OPEN
            else:
                size = float(size)
            jobs.append(JobSpec(int(raw["id"]), float(raw["release"]), size))
        return cls(tuple(jobs))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "release", "size"])
        for j in self.jobs:
            w.writerow([j.id, repr(j.release), "open" if is_open(j.size) else repr(j.size)])
        return buf.getvalue()


def _check_size(size) -> None:
    if is_open(size):
        return
    if not (isinstance(size, (int, float)) and math.isfinite(size) and size > 0):
        raise InvalidParameterError(f"job size must be > 0 or OPEN, got {size!r}")


def batch(n: int, size, t0: float = 0.0) -> Instance:
    """``n`` jobs of the same size, all released at ``t0``."""
    if n < 0:
        raise InvalidParameterError(f"n must be >= 0, got {n}")
    if n == 0:
        return Instance()
    _check_size(size)
    if not t0 >= 0:
        raise InvalidParameterError(f"t0 must be >= 0, got {t0}")
    s = size if is_open(size) else float(size)
    return Instance(tuple(JobSpec(i, float(t0), s) for i in range(1, n + 1)))


def stream(start: float, interval: float, size: float, count: int) -> Instance:
    """``count`` jobs released every ``interval`` starting at ``start``."""
    if not (interval > 0 and math.isfinite(interval)):
        raise InvalidParameterError(f"interval must be > 0, got {interval}")
    if count < 1:
        raise InvalidParameterError(f"count must be >= 1, got {count}")
    if is_open(size):
        raise InvalidParameterError("stream jobs need a finite size")
    _check_size(size)
    if not start >= 0:
        raise InvalidParameterError(f"start must be >= 0, got {start}")
    return Instance(
        tuple(JobSpec(i + 1, start + i * interval, float(size)) for i in range(count))
    )


def merge(a: Instance, b: Instance) -> Instance:
    """Union of two instances; ids are reassigned 1..N in (release, origin, id) order."""
    tagged = [(j.release, 0, j.id, j) for j in a.jobs] + [(j.release, 1, j.id, j) for j in b.jobs]
    tagged.sort(key=lambda t: t[:3])
    return Instance(
        tuple(JobSpec(i, t[3].release, t[3].size) for i, t in enumerate(tagged, start=1))
    )


def validate(inst: Instance | Sequence[JobSpec]) -> list[str]:
    """Violations of the instance invariants; an empty list means valid.

    Accepts a raw job sequence too, so unsorted input can be diagnosed
    before it is normalised into an :class:`Instance`.
    """
    jobs = list(inst.jobs if isinstance(inst, Instance) else inst)
    problems = []
    seen: set[int] = set()
    for pos, j in enumerate(jobs):
        if j.id in seen:
            problems.append(f"duplicate id {j.id}")
        seen.add(j.id)
        if not (isinstance(j.release, (int, float)) and math.isfinite(j.release) and j.release >= 0):
            problems.append(f"job {j.id}: release {j.release!r} must be a finite time >= 0")
        if not is_open(j.size) and not (
            isinstance(j.size, (int, float)) and math.isfinite(j.size) and j.size > 0
        ):
            problems.append(f"job {j.id}: size {j.size!r} must be > 0 or OPEN")
        if pos and _sort_key(jobs[pos - 1]) > _sort_key(j):
            problems.append(f"job {j.id} out of (release, id) order")
    # ids must grow with release time
    by_id = sorted(jobs, key=lambda j: j.id)
    for prev, cur in zip(by_id, by_id[1:]):
        if prev.id != cur.id and prev.release > cur.release:
            problems.append(f"job {cur.id} released before lower id {prev.id}")
    return problems


# -- adaptive workloads ------------------------------------------------------


@dataclass(frozen=True)
class Watch:
    """Fires when the processed work of ``job_id`` reaches ``threshold``."""

    job_id: int
    threshold: float


@dataclass
class Directives:
    """What an adaptive workload asks the engine to do at an event.

    ``releases`` holds ``(release_time, size)`` pairs, none of them earlier
    than the current time; ``finalize`` maps OPEN job ids to revealed sizes.
    """

    releases: list[tuple[float, float]] = field(default_factory=list)
    finalize: dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class WorkloadView:
    """Read-only engine state shown to adaptive workloads."""

    now: float
    active: tuple[int, ...]
    processed: Mapping[int, float]
    releases: Mapping[int, float]
    flow: float
    energy: float

    @property
    def cost(self) -> float:
        return self.flow + self.energy


class AdaptiveWorkload:
    """Workload that reacts to the schedule it is being run against.

    Subclasses provide the initial jobs, the watches the engine must
    resolve exactly, and the reaction when watches fire. An instance is
    bound to a single simulation run.
    """

    def initial_jobs(self) -> Iterable[JobSpec]:
        raise NotImplementedError

    def watches(self, view: WorkloadView) -> Sequence[Watch]:
        return ()

    def on_event(self, view: WorkloadView, fired: Sequence[Watch]) -> Directives:
        return Directives()
