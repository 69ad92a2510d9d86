import math

import pytest
from hypothesis import assume, given, strategies as st

from speedscale.errors import InvalidParameterError, PowerDomainError
from speedscale.power import from_dict, make_pathological, make_polynomial

CUBE = make_polynomial(3)
PATH = make_pathological()


def test_polynomial_values():
    assert CUBE.eval(2) == 8
    assert CUBE.eval(0) == 0
    assert make_polynomial(2.5).eval(1) == 1
    assert CUBE(1.5) == pytest.approx(3.375)
    assert CUBE.domain_upper == math.inf


@pytest.mark.parametrize("alpha", [1, 0.5, -2])
def test_polynomial_rejects_small_alpha(alpha):
    with pytest.raises(InvalidParameterError):
        make_polynomial(alpha)


def test_pathological_values():
    assert PATH.domain_upper == 2
    assert PATH.eval(1.75) == pytest.approx(1.0)
    assert PATH.eval(0) == pytest.approx(8 ** -0.25)
    assert PATH.eval(0) == pytest.approx(0.5946, abs=1e-4)


@pytest.mark.parametrize("P,s", [(PATH, 2.0), (PATH, 2.5), (CUBE, -1.0), (PATH, -0.1)])
def test_domain_errors(P, s):
    with pytest.raises(PowerDomainError):
        P.eval(s)
    with pytest.raises(PowerDomainError):
        P.derivative(s)


def test_inverse_examples():
    assert CUBE.inverse(8) == pytest.approx(2, rel=1e-12)
    assert PATH.inverse(1) == pytest.approx(1.75, rel=1e-12)
    assert CUBE.inverse(0) == 0


def test_inverse_below_range():
    with pytest.raises(PowerDomainError):
        CUBE.inverse(-1)
    with pytest.raises(PowerDomainError):
        PATH.inverse(0.5)


def test_derivative_examples():
    assert CUBE.derivative(2) == pytest.approx(12)
    assert PATH.derivative(1.75) == pytest.approx(1.0)
    assert PATH.derivative(0) == pytest.approx(8 ** -1.25)
    assert PATH.derivative(0) == pytest.approx(0.07433, abs=1e-5)


def test_extended_eval_beyond_domain():
    assert PATH.eval_extended(2.0) == math.inf
    assert PATH.eval_extended(1.75) == pytest.approx(1.0)


def test_from_dict_round_trip():
    assert from_dict(CUBE.to_dict()) == CUBE
    assert from_dict(PATH.to_dict()) == PATH
    assert from_dict({"kind": "polynomial", "alpha": 3.0})(2.0) == 8.0


powers = st.sampled_from([CUBE, make_polynomial(2), make_polynomial(1.5), PATH])


@given(powers, st.floats(0, 1.99), st.floats(0, 1.99))
def test_monotone(P, a, b):
    # below ~1e-9 spacing the cube underflows or rounds to equal floats
    assume(b - a > 1e-9)
    assert P.eval(a) < P.eval(b)


@given(powers, st.floats(0, 1.99))
def test_inverse_round_trip(P, s):
    assert abs(P.inverse(P.eval(s)) - s) <= 1e-9 * max(1.0, s)


@given(st.floats(1.01, 6), st.floats(0, 50), st.floats(1, 20))
def test_polynomial_superlinear(alpha, s, c):
    P = make_polynomial(alpha)
    assert P.eval(c * s) >= c * P.eval(s) * (1 - 1e-12)


def test_pathological_ode_and_finite_differences():
    h = 1e-6
    for i in range(1000):
        s = 1.99 * i / 999
        d = PATH.derivative(s)
        assert d == pytest.approx(PATH.eval(s) ** 5, rel=1e-9)
        lo, hi = max(0.0, s - h), s + h
        fd = (PATH.eval(hi) - PATH.eval(lo)) / (hi - lo)
        assert fd == pytest.approx(d, rel=1e-5)
