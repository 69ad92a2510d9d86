"""Scenario configs: load, validate, run, compare.

A scenario is one JSON document::

    {
      "name": "laps-vs-oracle",
      "power": {"kind": "polynomial", "alpha": 3},
      "policies": [{"policy": "laps_theorem1"}, {"policy": "rr_power_jobs"}],
      "workload": {"kind": "random", "seed": 7, "count": 100, "max_jobs": 4},
      "analysis": {"verify": true, "oracle": true, "samples": 16, "traces": true},
      "output": {"dir": "out"}
    }

Workload kinds: ``random`` (seeded generator), ``instance`` (JSON file),
``inline`` (list of instances given in place), ``batch``, ``lemma3`` and
``theorem2`` (adaptive adversaries).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from . import adversary, policy as policy_mod, power as power_mod, workload as wl
from .analysis import PotentialParams, oracle_opt, ratio, verify
from .engine import SimOptions, simulate
from .errors import ConfigurationError, SpeedScaleError
from .policy import Policy
from .power import PowerFunction
from .workload import Instance, JobSpec

log = logging.getLogger(__name__)

RANDOM_SIZE = (0.1, 2.0)
RANDOM_RELEASE = (0.0, 2.0)
RANDOM_MAX_JOBS = 5
INSTANCE_KINDS = ("random", "instance", "inline", "batch")
ADVERSARY_KINDS = ("lemma3", "theorem2")


def random_instances(seed: int, count: int, max_jobs: int = 4) -> list[Instance]:
    """``count`` instances of 1..max_jobs jobs; sizes U[0.1, 2], releases U[0, 2]."""
    if not 1 <= max_jobs <= RANDOM_MAX_JOBS:
        raise ConfigurationError(f"max_jobs must lie in [1, {RANDOM_MAX_JOBS}]", "workload.max_jobs")
    rng = random.Random(seed)
    out = []
    for _ in range(count):
        n = rng.randint(1, max_jobs)
        releases = sorted(rng.uniform(*RANDOM_RELEASE) for _ in range(n))
        sizes = [rng.uniform(*RANDOM_SIZE) for _ in range(n)]
        out.append(Instance(tuple(JobSpec(i + 1, r, s) for i, (r, s) in enumerate(zip(releases, sizes)))))
    return out


# -- config -----------------------------------------------------------------------------


@dataclass
class Scenario:
    name: str
    power: PowerFunction
    policies: list[Policy]
    workload: dict[str, Any]
    instances: list[Instance] = field(default_factory=list)
    verify: bool = True
    oracle: bool = True
    samples: int = 16
    traces: bool = True
    out_dir: Path = Path("out")
    max_events: int = 10**7

    @property
    def adaptive(self) -> bool:
        return self.workload["kind"] in ADVERSARY_KINDS

    @property
    def seed(self) -> int | None:
        return self.workload.get("seed")


def _get(doc: Mapping[str, Any], key: str, path: str, kind=None, default=...):
    if key not in doc:
        if default is ...:
            raise ConfigurationError("missing field", f"{path}.{key}" if path else key)
        return default
    val = doc[key]
    if kind is not None:
        kinds = kind if isinstance(kind, tuple) else (kind,)
        # bool is an int subclass; only accept it where a bool is asked for
        if not isinstance(val, kinds) or (isinstance(val, bool) and bool not in kinds):
            names = "/".join(getattr(k, "__name__", str(k)) for k in kinds)
            raise ConfigurationError(f"expected {names}, got {val!r}", f"{path}.{key}" if path else key)
    return val


def _instance(doc: Any, path: str) -> Instance:
    try:
        inst = Instance.from_json(json.dumps(doc))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad instance: {exc}", path) from None
    problems = wl.validate(inst)
    if problems:
        raise ConfigurationError("; ".join(problems), path)
    return inst


def _load_workload(doc: Mapping[str, Any], base: Path, seed: int | None) -> tuple[dict, list[Instance]]:
    path = "workload"
    if not isinstance(doc, Mapping):
        raise ConfigurationError("expected an object", path)
    spec = dict(doc)
    kind = _get(spec, "kind", path, str)
    if kind == "random":
        spec["seed"] = seed if seed is not None else _get(spec, "seed", path, int)
        count = _get(spec, "count", path, int, 100)
        max_jobs = _get(spec, "max_jobs", path, int, 4)
        if count < 0:
            raise ConfigurationError("must be >= 0", f"{path}.count")
        return spec, random_instances(spec["seed"], count, max_jobs)
    if kind == "instance":
        files = _get(spec, "path", path)
        files = [files] if isinstance(files, str) else files
        out = []
        for i, f in enumerate(files):
            p = (base / f).resolve()
            if not p.is_file():
                raise ConfigurationError(f"file not found: {p}", f"{path}.path[{i}]")
            out.append(_instance(json.loads(p.read_text()), f"{path}.path[{i}]"))
        return spec, out
    if kind == "inline":
        insts = _get(spec, "instances", path, list)
        return spec, [_instance(d, f"{path}.instances[{i}]") for i, d in enumerate(insts)]
    if kind == "batch":
        try:
            inst = wl.batch(_get(spec, "n", path, int), float(_get(spec, "size", path, (int, float))),
                            float(_get(spec, "t0", path, (int, float), 0.0)))
        except ValueError as exc:
            raise ConfigurationError(str(exc), path) from None
        return spec, [inst]
    if kind == "lemma3":
        _get(spec, "k", path, (int, float))
        _get(spec, "v", path, (int, float))
        return spec, []
    if kind == "theorem2":
        _get(spec, "eps", path, (int, float))
        return spec, []
    raise ConfigurationError(f"unknown workload kind {kind!r}", f"{path}.kind")


def load_scenario(
    path: str | Path,
    out: str | Path | None = None,
    seed: int | None = None,
    max_events: int | None = None,
) -> Scenario:
    """Parse and validate a config; nothing runs until every field checks out."""
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ConfigurationError("config must be a JSON object")
    name = _get(doc, "name", "", str, p.stem)
    pdoc = _get(doc, "power", "", Mapping)
    try:
        pw = power_mod.from_dict(pdoc)
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(str(exc), "power") from None
    pols = _get(doc, "policies", "", list)
    policies = []
    for i, spec in enumerate(pols):
        ppath = f"policies[{i}]"
        if not isinstance(spec, Mapping):
            raise ConfigurationError("expected an object", ppath)
        pol = policy_mod.from_dict(spec, pw, ppath)
        try:
            pol.check_power(pw)
        except ConfigurationError as exc:
            raise ConfigurationError(str(exc), ppath) from None
        policies.append(pol)
    wspec, instances = _load_workload(_get(doc, "workload", "", Mapping), p.parent, seed)
    adoc = _get(doc, "analysis", "", Mapping, {})
    odoc = _get(doc, "output", "", Mapping, {})
    sc = Scenario(
        name=name,
        power=pw,
        policies=policies,
        workload=wspec,
        instances=instances,
        verify=bool(_get(adoc, "verify", "analysis", bool, True)),
        oracle=bool(_get(adoc, "oracle", "analysis", bool, True)),
        samples=_get(adoc, "samples", "analysis", int, 16),
        traces=bool(_get(adoc, "traces", "analysis", bool, True)),
        out_dir=Path(out) if out is not None else (p.parent / _get(odoc, "dir", "output", str, "out")),
        max_events=max_events if max_events is not None else _get(doc, "max_events", "", int, 10**7),
    )
    if sc.samples < 0:
        raise ConfigurationError("must be >= 0", "analysis.samples")
    if sc.verify and not sc.adaptive and not sc.oracle:
        raise ConfigurationError("verification needs the oracle reference", "analysis.verify")
    if sc.adaptive:
        if sc.workload["kind"] == "theorem2" and not pw.is_polynomial:
            raise ConfigurationError("theorem2 adversary needs polynomial power", "power")
        adversary_params(sc)
    return sc


# -- running ----------------------------------------------------------------------------


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text).strip("_")


def _is_theorem1(pol: Policy, pw: PowerFunction) -> bool:
    if not pw.is_polynomial:
        return False
    a = pw.alpha
    return pol.is_laps(3.0 / a, 1.0 / (2.0 * a), a)


def _dump(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _run_instance(sc: Scenario, pol: Policy, inst: Instance, ref, run_id: str, out: Path) -> dict[str, Any]:
    rec: dict[str, Any] = {"id": run_id, "policy": pol.name, "jobs": len(inst.jobs)}
    trace = simulate(inst, pol, sc.power, SimOptions(max_events=sc.max_events), label=pol.name)
    cost = trace.cost()
    problems = trace.check()
    rec["cost"] = cost.to_dict()
    rec["check_errors"] = problems
    rec["ok"] = not problems
    if sc.traces:
        _dump(out / "traces" / f"{run_id}.csv", trace.to_csv())
    _dump(out / "costs" / f"{run_id}.json", cost.to_json() + "\n")
    if ref is not None:
        rec["oracle_cost"] = ref.cost
        rec["ratio"] = ratio(cost, ref.cost) if ref.cost > 0 else None
    if sc.verify and ref is not None:
        if _is_theorem1(pol, sc.power):
            report = verify(trace, ref.trace, PotentialParams(sc.power.alpha), sc.samples)
            _dump(out / "verifier" / f"{run_id}.json", report.to_json() + "\n")
            rec["verifier"] = report.summary()
            rec["ok"] = rec["ok"] and report.ok
        else:
            rec["verifier"] = "skipped: only LAPS(3/alpha, 1/(2 alpha)) is covered by the potential"
    return rec


def adversary_params(sc: Scenario) -> adversary.Lemma3Params:
    w = sc.workload
    try:
        if w["kind"] == "lemma3":
            eps = w.get("epsilon")
            return adversary.Lemma3Params(float(w["k"]), float(w["v"]), sc.power, None if eps is None else float(eps))
        return replace(adversary.theorem2_params(sc.power.alpha, float(w["eps"])), power=sc.power)
    except ValueError as exc:
        raise ConfigurationError(str(exc), "workload") from None


def _run_adversary(sc: Scenario, pol: Policy, run_id: str, out: Path) -> dict[str, Any]:
    params = adversary_params(sc)
    outcome = adversary.run_lemma3(params, pol, SimOptions(max_events=sc.max_events))
    rec: dict[str, Any] = {"id": run_id, "policy": pol.name, "outcome": outcome.to_dict()}
    problems = outcome.alg_trace.check()
    if outcome.opt_trace is not None:
        problems += [f"opt: {m}" for m in outcome.opt_trace.check()]
    rec["check_errors"] = problems
    rec["ok"] = not problems
    rec["cost"] = outcome.alg_cost.to_dict()
    rec["ratio"] = outcome.ratio_lower
    _dump(out / "outcomes" / f"{run_id}.json", outcome.to_json() + "\n")
    if sc.traces:
        _dump(out / "traces" / f"{run_id}.csv", outcome.alg_trace.to_csv())
        if outcome.opt_trace is not None:
            _dump(out / "traces" / f"{run_id}.opt.csv", outcome.opt_trace.to_csv())
    if sc.verify and outcome.opt_trace is not None and _is_theorem1(pol, sc.power):
        report = verify(outcome.alg_trace, outcome.opt_trace, PotentialParams(sc.power.alpha), sc.samples)
        _dump(out / "verifier" / f"{run_id}.json", report.to_json() + "\n")
        rec["verifier"] = report.summary()
        rec["ok"] = rec["ok"] and report.ok
    return rec


def run_scenario(sc: Scenario) -> tuple[dict[str, Any], bool]:
    """Execute every (policy, workload) pair; returns the summary and overall status."""
    out = sc.out_dir / _slug(sc.name)
    runs: list[dict[str, Any]] = []
    refs: dict[int, Any] = {}
    if sc.oracle and not sc.adaptive:
        for w, inst in enumerate(sc.instances):
            try:
                refs[w] = oracle_opt(inst, sc.power)
            except SpeedScaleError as exc:
                log.warning("oracle failed on workload %d: %s", w, exc)
                refs[w] = None
    for i, pol in enumerate(sc.policies):
        stem = f"p{i:02d}-{_slug(pol.name)}"
        targets = [None] if sc.adaptive else list(range(len(sc.instances)))
        for w in targets:
            run_id = stem if w is None else f"{stem}__w{w:03d}"
            try:
                if w is None:
                    rec = _run_adversary(sc, pol, run_id, out)
                else:
                    rec = _run_instance(sc, pol, sc.instances[w], refs.get(w), run_id, out)
            except SpeedScaleError as exc:
                log.error("run %s failed: %s", run_id, exc)
                rec = {"id": run_id, "policy": pol.name, "ok": False, "error": f"{type(exc).__name__}: {exc}"}
            runs.append(rec)
    ratios = [r["ratio"] for r in runs if r.get("ratio") is not None]
    violations = [r["verifier"]["max_violation"] for r in runs if isinstance(r.get("verifier"), dict)]
    all_ok = all(r["ok"] for r in runs)
    summary = {
        "name": sc.name,
        "power": sc.power.to_dict(),
        "policies": [p.to_dict() for p in sc.policies],
        "workload": sc.workload,
        "seed": sc.seed,
        "n_workloads": 1 if sc.adaptive else len(sc.instances),
        "n_runs": len(runs),
        "n_failed": sum(not r["ok"] for r in runs),
        "max_ratio": max(ratios, default=None),
        "max_violation": max(violations, default=None),
        "all_ok": all_ok,
        "runs": runs,
    }
    _dump(out / "summary.json", _json(summary))
    return summary, all_ok


def compare_scenario(sc: Scenario) -> list[dict[str, Any]]:
    """One row per policy with costs summed over the shared workload set."""
    out = sc.out_dir / _slug(sc.name)
    if sc.adaptive:
        raise ConfigurationError("compare needs an instance workload, not an adversary", "workload.kind")
    if not sc.instances:
        log.warning("empty workload set: comparison table is empty")
    refs = [oracle_opt(inst, sc.power) if sc.oracle else None for inst in sc.instances]
    rows = []
    for pol in sc.policies:
        if not sc.instances:
            break
        flow = energy = total = ref_total = 0.0
        worst = None
        for inst, ref in zip(sc.instances, refs):
            c = simulate(inst, pol, sc.power, SimOptions(max_events=sc.max_events)).cost()
            flow += c.total_flow
            energy += c.total_energy
            total += c.total
            if ref is not None and ref.cost > 0:
                ref_total += ref.cost
                r = ratio(c, ref.cost)
                worst = r if worst is None else max(worst, r)
        rows.append(
            {
                "policy": pol.name,
                "flow": flow,
                "energy": energy,
                "total": total,
                "ratio": total / ref_total if ref_total > 0 else None,
                "max_ratio": worst,
            }
        )
    _dump(out / "compare.json", _json({"name": sc.name, "seed": sc.seed, "rows": rows}))
    _dump(out / "compare.csv", rows_to_csv(rows))
    return rows


COLUMNS = ("policy", "flow", "energy", "total", "ratio", "max_ratio")


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def format_table(rows: list[dict[str, Any]]) -> str:
    def cell(v):
        if v is None:
            return "-"
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    grid = [list(COLUMNS)] + [[cell(r[c]) for c in COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in grid) for i in range(len(COLUMNS))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in grid]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
