import pytest
from hypothesis import given, settings, strategies as st

from speedscale.adversary import (
    BIG_COST,
    LAGGING,
    Lemma3Params,
    big_cost_opt_bound,
    growth_check,
    lemma3_adversary,
    lemma3_opt_bound,
    run_lemma3,
    theorem2_params,
    theorem3_speed,
)
from speedscale.errors import InvalidParameterError
from speedscale.policy import laps, rr_fixed, rr_power_jobs, setf_power_jobs
from speedscale.power import make_pathological, make_polynomial
from speedscale.workload import is_open

CUBE = make_polynomial(3)
PATH = make_pathological()


def test_params_examples():
    p = Lemma3Params(2, 1, CUBE)
    assert p.n == 2
    assert p.epsilon == pytest.approx(1 / 64)
    assert p.stream_count == 1024
    assert p.small_size == pytest.approx(1 / 64)
    adv = lemma3_adversary(p)
    jobs = list(adv.initial_jobs())
    assert len(jobs) == 2 and all(j.release == 0 and is_open(j.size) for j in jobs)


def test_params_validation():
    with pytest.raises(InvalidParameterError):
        Lemma3Params(0.5, 1, CUBE)
    with pytest.raises(InvalidParameterError):
        Lemma3Params(2, 0.5, CUBE)
    with pytest.raises(InvalidParameterError):
        Lemma3Params(2, 1, CUBE, epsilon=1 / 32)


def test_opt_bound_examples():
    assert lemma3_opt_bound(Lemma3Params(2, 1, CUBE)) == pytest.approx(68)
    assert lemma3_opt_bound(Lemma3Params(1, 1, CUBE)) == pytest.approx(6)
    for k in (1, 1.5, 3):
        n = -(-k // 1)
        assert lemma3_opt_bound(Lemma3Params(k, 1, CUBE)) == pytest.approx(k * n**3 + 3 * n**4 + 2 * n)
    assert big_cost_opt_bound(Lemma3Params(2, 1, CUBE)) == pytest.approx(16)


def test_theorem2_params():
    p = theorem2_params(8, 1 / 12)
    assert p.k == pytest.approx(8 ** 0.25) and p.k == pytest.approx(1.6818, abs=1e-4)
    assert p.v == 1 and p.n == 2
    assert theorem2_params(3, 1 / 3 - 1e-9).k == pytest.approx(1, abs=1e-8)
    with pytest.raises(InvalidParameterError):
        theorem2_params(3, 0.5)


def test_theorem3_speed():
    v1 = theorem3_speed(1)
    assert v1 == pytest.approx(2 - 1 / 262144, abs=1e-15)
    assert PATH(v1) == pytest.approx(16, rel=1e-9)
    v2 = theorem3_speed(2)
    assert v2 == 2 - 0.25 * 256.0**-4
    assert PATH(v2) >= 256 - 1e-6


@pytest.mark.parametrize("k", [1, 2, 4])
def test_growth(k):
    g = growth_check(PATH, k, theorem3_speed(k))
    assert g["ratio"] >= k * (1 - 1e-3)
    assert g["linearized"] >= k * (1 - 1e-3)


def test_lemma3_laps_lagging_branch():
    out = run_lemma3(Lemma3Params(2, 1, CUBE), laps(1, 1 / 6, 3))
    assert out.branch == LAGGING
    assert out.cost_at_T < 2 * 2**3
    n = 2
    trig = out.trigger
    assert out.processed_at_T[trig] == pytest.approx(n)
    # every big job, the trigger included, is revealed as q + 1
    for j, q in out.processed_at_T.items():
        assert out.sizes[j] == pytest.approx(q + 1)
    at_T = out.alg_trace.state_at(out.T, "left")
    assert all(at_T.remaining[j] == pytest.approx(1) for j in range(1, n + 1))
    # the reference finishes j_1..j_{n-1} by T and leaves n units on the trigger job
    ref_T = out.opt_trace.state_at(out.T, "left")
    assert ref_T.remaining[trig] == pytest.approx(n)
    assert all(ref_T.remaining.get(j, 0) == pytest.approx(0, abs=1e-9) for j in range(1, n + 1) if j != trig)
    assert out.alg_trace.check() == []
    assert out.opt_trace.check() == []
    assert out.opt_cost.total <= 68
    assert out.ratio_lower == pytest.approx(out.alg_cost.total / out.opt_cost.total)
    # small jobs finish before the next one is released
    smalls = sorted(
        (j for j in out.opt_trace.jobs.values() if j.release >= out.T and j.size < 1),
        key=lambda j: j.release,
    )
    assert len(smalls) == 1024
    eps = out.params.epsilon
    assert all(j.completion <= j.release + eps * (1 + 1e-9) for j in smalls)
    # tail: the trigger job alone at speed 1 for n time units
    tail = [iv for iv in out.opt_trace.intervals if iv.t_start >= out.T + n**4 - 1e-9]
    assert sum(iv.length for iv in tail) == pytest.approx(n)
    assert all(iv.speed == pytest.approx(1) for iv in tail)


def test_lemma3_big_cost_branch():
    out = run_lemma3(Lemma3Params(2, 1, CUBE), rr_fixed(0.3))
    assert out.branch == BIG_COST
    assert out.cost_at_T >= 2 * 2**3
    assert all(s == 2 for s in out.sizes.values())
    assert out.opt_trace is None and out.opt_reference == 16
    assert out.alg_trace.check() == []


def test_outcome_json():
    import json

    out = run_lemma3(Lemma3Params(1, 1, CUBE), laps(1, 1 / 6, 3))
    doc = json.loads(out.to_json())
    for key in ("branch", "T", "n", "epsilon", "sizes", "alg_cost", "opt_bound", "opt_cost", "ratio_lower"):
        assert key in doc


@settings(max_examples=12)
@given(
    st.sampled_from(
        [laps(1, 1 / 6, 3), laps(0.5, 0.5, 3), laps(1, 1, 3), rr_power_jobs(CUBE), setf_power_jobs(CUBE), rr_fixed(1.5), rr_fixed(0.4)]
    ),
    st.sampled_from([1.0, 1.5, 2.0]),
)
def test_bound_soundness_across_policies(pol, k):
    params = Lemma3Params(k, 1, CUBE)
    out = run_lemma3(params, pol)
    assert out.alg_trace.check() == []
    if out.branch == LAGGING:
        assert out.opt_trace.check() == []
        assert out.opt_cost.total <= lemma3_opt_bound(params) * (1 + 1e-9)
        top = max(iv.speed for iv in out.alg_trace.intervals)
        assert max(iv.speed for iv in out.opt_trace.intervals) <= max(top, 1.0) * (1 + 1e-12)
    else:
        assert out.cost_at_T >= k * params.n**3
