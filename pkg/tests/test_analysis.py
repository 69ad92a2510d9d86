import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import instances
from speedscale.analysis import (
    PotentialParams,
    check_events,
    check_running,
    default_grid,
    oracle_opt,
    potential,
    ratio,
    single_job_opt,
    verify,
    young_check,
)
from speedscale.engine import Segment, Snapshot, replay, simulate
from speedscale.errors import ConfigurationError, InputMismatchError, InvalidParameterError, SizeLimitError
from speedscale.policy import laps, laps_theorem1, rr_fixed
from speedscale.power import make_polynomial
from speedscale.workload import Instance, JobSpec, batch

CUBE = make_polynomial(3)
P3 = PotentialParams(3)


def snap(remaining, active=None, t=0.0):
    active = tuple(sorted(remaining) if active is None else active)
    return Snapshot(
        time=t,
        active=active,
        processed={j: 0.0 for j in remaining},
        remaining=dict(remaining),
        flow=0.0,
        energy=0.0,
        speed=0.0,
        rates={},
    )


def test_params_constants():
    assert P3.c == pytest.approx(972)
    assert P3.gamma == pytest.approx(27)
    assert PotentialParams(2).c == pytest.approx(232)
    for a in (1.5, 2, 3, 4.5):
        p = PotentialParams(a)
        assert p.gamma == pytest.approx(p.c / (4 * a * a), rel=1e-14)
    with pytest.raises(InvalidParameterError):
        PotentialParams(1)


def test_potential_examples():
    assert potential(snap({}), snap({}), P3) == 0
    assert potential(snap({1: 0.5, 2: 1.0}), snap({1: 0.7, 2: 1.0}), P3) == 0
    assert potential(snap({1: 2.0}), snap({1: 1.0}), P3) == pytest.approx(27)
    # the second job in (release, id) order carries weight 2^(2/3)
    two = potential(snap({1: 1.0, 2: 2.0}), snap({1: 1.0, 2: 1.0}), P3)
    assert two == pytest.approx(27 * 2 ** (2 / 3))


def test_potential_job_finished_in_reference_counts_as_zero():
    a = snap({1: 1.0, 2: 0.5}, active=(1, 2))
    o = snap({1: 0.0, 2: 0.5}, active=(2,))
    assert potential(a, o, P3) == pytest.approx(27)


def test_potential_mismatch():
    with pytest.raises(InputMismatchError):
        potential(snap({1: 1.0}), snap({2: 1.0}), P3)
    a = simulate(batch(2, 1, 0), laps_theorem1(3), CUBE)
    o = simulate(batch(3, 1, 0), laps_theorem1(3), CUBE)
    with pytest.raises(InputMismatchError):
        check_events(a, o, P3)


def test_events_arrival_and_reference_completion():
    inst = Instance((JobSpec(1, 0.0, 1.0), JobSpec(2, 0.3, 1.0), JobSpec(3, 0.6, 0.5)))
    a = simulate(inst, laps_theorem1(3), CUBE)
    o = oracle_opt(inst, CUBE).trace
    jumps = check_events(a, o, P3)
    for j in jumps:
        if j.kind == "arrival" or j.source == "ref":
            assert j.delta == pytest.approx(0, abs=1e-12)
        assert j.ok
    assert any(j.kind == "completion" and j.source == "alg" for j in jumps)


def test_events_algorithm_completion_does_not_increase():
    # the algorithm lags on jobs 2 and 3; finishing job 1 moves them to smaller coefficients
    inst = Instance((JobSpec(1, 0.0, 0.5), JobSpec(2, 0.0, 2.0), JobSpec(3, 0.0, 2.0)))
    a = replay(inst, [Segment(0, 0.5, 1, {1: 1.0}), Segment(0.5, 4.5, 1, {2: 0.5, 3: 0.5})], CUBE)
    o = replay(inst, [Segment(0, 2, 1, {2: 1.0}), Segment(2, 4, 1, {3: 1.0}), Segment(4, 4.5, 1, {1: 1.0})], CUBE)
    jumps = [j for j in check_events(a, o, P3) if j.source == "alg" and j.kind == "completion"]
    first = jumps[0]
    assert first.time == pytest.approx(0.5)
    assert first.delta < 0
    assert all(j.delta <= 1e-12 for j in jumps)


def test_running_idle_and_mirror():
    inst = Instance((JobSpec(1, 1.0, 1.0),))
    a = simulate(inst, laps_theorem1(3), CUBE)
    samples = check_running(a, a, P3)
    idle = [s for s in samples if s.time < 1.0]
    assert idle and all(s.lhs == 0 and s.rhs == 0 and s.ok for s in idle)
    busy = [s for s in samples if s.time >= 1.0]
    assert all(s.dphi == 0 and s.ok for s in busy)


def test_running_against_oracle():
    inst = Instance((JobSpec(1, 0.0, 1.2), JobSpec(2, 0.4, 0.3), JobSpec(3, 0.9, 1.7)))
    a = simulate(inst, laps_theorem1(3), CUBE)
    o = oracle_opt(inst, CUBE).trace
    samples = check_running(a, o, P3)
    assert len(samples) > 16
    assert all(s.ok for s in samples)


def test_running_needs_theorem1_laps():
    a = simulate(batch(2, 1, 0), laps(1, 0.5, 3), CUBE)
    with pytest.raises(ConfigurationError):
        check_running(a, a, P3)
    r = simulate(batch(2, 1, 0), rr_fixed(1), CUBE)
    with pytest.raises(ConfigurationError):
        check_running(r, r, P3)


def test_report_json():
    inst = Instance((JobSpec(1, 0.0, 1.0), JobSpec(2, 0.5, 0.5)))
    a = simulate(inst, laps_theorem1(3), CUBE)
    rep = verify(a, oracle_opt(inst, CUBE).trace)
    assert rep.ok and rep.boundary_ok
    doc = json.loads(rep.to_json(full=True))
    assert doc["ok"] and doc["failures"] == []
    assert len(doc["running_samples"]) == len(rep.running_samples)
    assert rep.max_violation == max(
        [abs(rep.boundary["phi_start"]), abs(rep.boundary["phi_end"]), -rep.min_phi]
        + [j.delta for j in rep.event_jumps]
        + [s.lhs - s.rhs for s in rep.running_samples]
    )


def test_young_examples():
    for a in (1.5, 2, 3):
        h = 1.7
        g = h ** (1 / (a - 1))
        r = young_check(a, g, h)
        assert r.lhs == pytest.approx(r.rhs, rel=1e-12) and r.ok
    r = young_check(3, 0, 5)
    assert r.rhs == 0 and r.lhs >= 0 and r.ok
    r = young_check(3, 2, 1)
    assert r.lhs == pytest.approx(10 / 3) and r.rhs == 2 and r.ok
    with pytest.raises(InvalidParameterError):
        young_check(3, -1, 1)


@given(st.floats(1.01, 5), st.floats(0, 10), st.floats(0, 10))
def test_young_property(a, g, h):
    assert young_check(a, g, h).ok


def test_single_job_opt_examples():
    r = single_job_opt(1, 3)
    assert r.speed == pytest.approx(0.79370, abs=1e-5)
    assert r.cost == pytest.approx(1.88988, abs=1e-5)
    assert single_job_opt(2, 3).cost == pytest.approx(2 * r.cost)
    two = single_job_opt(1.5, 2)
    assert two.speed == pytest.approx(1) and two.cost == pytest.approx(3)
    with pytest.raises(InvalidParameterError):
        single_job_opt(0, 3)
    with pytest.raises(InvalidParameterError):
        single_job_opt(1, 1)


def test_ratio_examples():
    a = simulate(batch(1, 1, 0), laps(1, 0.5, 3), CUBE).cost()
    assert ratio(a, 1.88988) == pytest.approx(2.381, abs=1e-3)
    assert ratio(a, a.total) == 1
    with pytest.raises(InvalidParameterError):
        ratio(a, 0)


def test_oracle_examples():
    assert oracle_opt(batch(1, 1, 0), CUBE).cost == pytest.approx(1.88988, abs=1e-3)
    assert oracle_opt(Instance(()), CUBE).cost == 0
    two = oracle_opt(batch(2, 1, 0), CUBE)
    s = single_job_opt(1, 3).speed
    seq = replay(batch(2, 1, 0), [Segment(0, 1 / s, s, {1: 1.0}), Segment(1 / s, 2 / s, s, {2: 1.0})], CUBE)
    assert two.cost <= seq.cost().total
    # first job with 2 jobs waiting runs at the stationary speed 1, then s*: 3 + 1.88988
    assert two.cost == pytest.approx(3 + single_job_opt(1, 3).cost, abs=1e-3)
    assert two.trace.check() == []


def test_oracle_limits():
    with pytest.raises(SizeLimitError):
        oracle_opt(batch(6, 1, 0), CUBE)
    with pytest.raises(SizeLimitError):
        oracle_opt(batch(3, 4, 0), CUBE)


def test_default_grid_shape():
    g = default_grid(CUBE)
    s = single_job_opt(1, 3).speed
    assert len(g.levels) == 64 and s in g.levels
    assert g.levels[0] == pytest.approx(0.1 * s, rel=0.05)
    assert g.levels[-1] == pytest.approx(4 * s, rel=0.05)
    fine = g.refined()
    assert len(fine.levels) == 127 and fine.coarsened() == g


@settings(max_examples=20)
@given(instances(max_jobs=4), st.sampled_from([2.0, 3.0]))
def test_oracle_refinement_monotone(inst, alpha):
    P = make_polynomial(alpha)
    g = default_grid(P)
    assert oracle_opt(inst, P, g.refined()).cost <= oracle_opt(inst, P, g).cost + 1e-9


@settings(max_examples=30)
@given(instances(max_jobs=4), st.sampled_from([2.0, 3.0]))
def test_verifier_and_bound_on_random_instances(inst, alpha):
    P = make_polynomial(alpha)
    a = simulate(inst, laps_theorem1(alpha), P)
    ref = oracle_opt(inst, P)
    rep = verify(a, ref.trace)
    assert rep.ok, rep.failures[:1]
    assert a.cost().total <= PotentialParams(alpha).c * ref.cost


def test_young_near_alpha_one_does_not_overflow():
    r = young_check(1.0001, 9.0, 9.5)
    assert r.lhs == math.inf and r.ok
