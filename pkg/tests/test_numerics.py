import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mecpaoi import numerics
from mecpaoi.numerics import BadBracketError, Bracket, QuadratureError


def test_integrate_semi_infinite_exponential():
    assert numerics.integrate(lambda x: math.exp(-x), 0.0, math.inf) == pytest.approx(1.0, rel=1e-12)


def test_integrate_respects_breakpoints():
    step = lambda x: 1.0 if x < 0.3 else 0.0
    assert numerics.integrate(step, 0.0, 1.0, points=[0.3]) == pytest.approx(0.3, abs=1e-14)


def test_integrate_reversed_limits():
    assert numerics.integrate(lambda x: x, 1.0, 0.0) == pytest.approx(-0.5)


def test_integrate_raises_on_nonintegrable():
    with pytest.raises(QuadratureError):
        numerics.integrate(lambda x: 1.0 / x, 0.0, 1.0, rel_tol=1e-10, limit=20)


def test_integrate_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        numerics.integrate(lambda x: x, 0.0, 1.0, rel_tol=0.0)


@given(st.floats(0.1, 10.0), st.floats(0.5, 3.0))
@settings(max_examples=30, deadline=None)
def test_integrate_gamma_moments(rate, k):
    # int x^k rate e^{-rate x} = Gamma(k+1) / rate^k
    got = numerics.integrate(lambda x: x**k * rate * math.exp(-rate * x), 0.0, math.inf, 1e-10)
    assert got == pytest.approx(math.gamma(k + 1) / rate**k, rel=1e-8)


def test_bisect_finds_sqrt2():
    r = numerics.bisect(lambda x: x * x - 2.0, (0.0, 2.0), tol=1e-13)
    assert r == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_bisect_accepts_bracket_and_endpoint_roots():
    assert numerics.bisect(lambda x: x, Bracket(0.0, 1.0, -1, 1)) == 0.0
    assert numerics.bisect(lambda x: x - 1.0, (0.0, 1.0)) == 1.0


def test_bisect_bad_bracket():
    with pytest.raises(BadBracketError):
        numerics.bisect(lambda x: x * x + 1.0, (-1.0, 1.0))


def test_bracket_validation():
    with pytest.raises(ValueError):
        Bracket(1.0, 0.0, -1, 1)


@given(st.floats(-5.0, 5.0))
@settings(max_examples=40, deadline=None)
def test_bisect_monotone_root(c):
    r = numerics.bisect(lambda x: x**3 + x - c, (-10.0, 10.0), tol=1e-12)
    assert abs(r**3 + r - c) < 1e-9


def test_find_sign_changes_sine():
    br = numerics.find_sign_changes(math.sin, 0.5, 10.0, grid=200)
    roots = [numerics.bisect(math.sin, b, 1e-12) for b in br]
    assert roots == pytest.approx([math.pi, 2 * math.pi, 3 * math.pi], abs=1e-10)


def test_find_sign_changes_zero_on_node():
    # root exactly at a node is bracketed from that node
    br = numerics.find_sign_changes(lambda x: x - 0.5, 0.0, 1.0, nodes=[0.0, 0.5, 1.0])
    assert len(br) == 1
    assert br[0].lo == 0.5


def test_find_sign_changes_none():
    assert numerics.find_sign_changes(lambda x: 1.0 + x * x, -1.0, 1.0, grid=11) == []


def test_golden_section_quadratic():
    x, fx = numerics.golden_section(lambda x: (x - 0.3) ** 2 + 1.0, 0.0, 1.0, tol=1e-10)
    # a flat minimum pins x only to about sqrt(machine eps)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert fx == pytest.approx(1.0, abs=1e-15)


def test_golden_section_monotone_returns_boundary():
    x, _ = numerics.golden_section(lambda x: x, 0.0, 2.0)
    assert x == 0.0


@given(st.floats(-3.0, 3.0), st.floats(0.1, 5.0))
@settings(max_examples=40, deadline=None)
def test_golden_section_property(m, w):
    x, _ = numerics.golden_section(lambda x: w * (x - m) ** 2, -4.0, 4.0, tol=1e-10)
    assert abs(x - m) < 1e-6
