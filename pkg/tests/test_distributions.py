import math

import numpy as np
import pytest
import scipy.stats as ss
from hypothesis import given, settings, strategies as st

from mecpaoi.distributions import (
    Deterministic, Exponential, Pareto, from_json, rng_stream, with_mean,
)
from oracles import pareto_laplace_trapezoid


def scipy_law(d):
    if isinstance(d, Exponential):
        return ss.expon(scale=1.0 / d.rate)
    if isinstance(d, Pareto):
        return ss.pareto(d.alpha, scale=d.xm)
    raise TypeError


LAWS = [Exponential(2.0), Exponential(0.7), Pareto(0.25, 2.0), Pareto(1.0, 3.5)]


@pytest.mark.parametrize("d", LAWS, ids=str)
def test_moments_and_cdf_against_scipy(d):
    ref = scipy_law(d)
    assert d.mean == pytest.approx(ref.mean(), rel=1e-12)
    xs = np.array([0.01, 0.3, 1.0, 2.5])
    assert d.cdf(xs) == pytest.approx(ref.cdf(xs), abs=1e-14)
    assert d.pdf(xs) == pytest.approx(ref.pdf(xs), abs=1e-12)
    for p in (0.1, 0.5, 0.99):
        assert d.quantile(p) == pytest.approx(ref.ppf(p), rel=1e-12)


@pytest.mark.parametrize("d", LAWS, ids=str)
@pytest.mark.parametrize("s", [0.0, 0.2, 0.9, 3.0])
def test_excess_and_partial_mean_against_scipy(d, s):
    ref = scipy_law(d)
    lb = max(s, ref.support()[0])
    excess = ref.expect(lambda x: x - s, lb=lb, epsrel=1e-12)
    assert d.excess_mean(s) == pytest.approx(excess, rel=1e-8, abs=1e-12)
    partial = ref.expect(lambda x: x, ub=s, epsrel=1e-11) if s > ref.support()[0] else 0.0
    assert d.partial_mean(s) == pytest.approx(partial, rel=1e-8, abs=1e-12)
    assert d.expected_min(s) == pytest.approx(d.mean - excess, rel=1e-8, abs=1e-12)


def test_expected_min_infinite_is_mean():
    assert Pareto(0.25, 2.0).expected_min(math.inf) == 0.5


def test_pareto_laplace_pinned():
    # E[exp(-2 T)] for xm=0.25, alpha=2 (mean 0.5), oracle: dense trapezoid
    lap, _ = Pareto(0.25, 2.0).transforms(2.0)
    assert lap == pytest.approx(pareto_laplace_trapezoid(0.25, 2.0, 2.0), rel=1e-8)
    assert lap == pytest.approx(0.44320872855, abs=1e-10)


@pytest.mark.parametrize("mu", [0.5, 2.0, 4.0])
def test_exponential_transforms_closed_form(mu):
    lam = 1.7
    lap, wl = Exponential(lam).transforms(mu)
    assert lap == pytest.approx(lam / (lam + mu), rel=1e-14)
    assert wl == pytest.approx(lam / (lam + mu) ** 2, rel=1e-14)


@pytest.mark.parametrize("d", [Pareto(0.3, 2.5), Deterministic(0.7)], ids=str)
def test_transforms_by_monte_carlo(d):
    x = d.sample_array(rng_stream(5, 0), 400_000)
    lap, wl = d.transforms(1.3)
    assert lap == pytest.approx(np.exp(-1.3 * x).mean(), rel=3e-3)
    assert wl == pytest.approx((x * np.exp(-1.3 * x)).mean(), rel=3e-3)


def test_deterministic_behaviour():
    d = Deterministic(0.5)
    assert d.cdf(0.5) == 1.0 and d.cdf(0.4999) == 0.0
    assert d.expected_min(0.2) == 0.2
    assert d.excess_mean(0.2) == pytest.approx(0.3)
    assert d.expect(lambda x: x * x) == 0.25
    assert np.all(d.sample_array(rng_stream(1), 10) == 0.5)


@pytest.mark.parametrize("d", LAWS, ids=str)
def test_sampling_ks(d):
    x = d.sample_array(rng_stream(11, 3), 50_000)
    assert ss.kstest(x, scipy_law(d).cdf).pvalue > 0.001


def test_streams_reproducible_and_distinct():
    a = rng_stream(42, 1).random(5)
    assert np.array_equal(a, rng_stream(42, 1).random(5))
    assert not np.array_equal(a, rng_stream(42, 2).random(5))


def test_validation():
    with pytest.raises(ValueError):
        Exponential(0.0)
    with pytest.raises(ValueError):
        Pareto(0.25, 1.0)
    with pytest.raises(ValueError):
        Pareto(-1.0, 2.0)
    with pytest.raises(ValueError):
        Deterministic(-0.1)


@pytest.mark.parametrize("obj", [
    {"kind": "exponential", "rate": 2.0},
    {"kind": "pareto", "xm": 0.25, "alpha": 2.0},
    {"kind": "deterministic", "value": 0.5},
])
def test_json_round_trip(obj):
    assert from_json(obj).to_json() == obj


def test_from_json_errors():
    with pytest.raises(ValueError):
        from_json({"kind": "gamma"})
    with pytest.raises(ValueError):
        from_json({"kind": "exponential"})


@given(st.sampled_from(["exponential", "pareto", "deterministic"]), st.floats(0.01, 10.0))
def test_with_mean(kind, m):
    assert with_mean(kind, m).mean == pytest.approx(m, rel=1e-12)


@given(st.floats(0.05, 5.0), st.floats(1.2, 6.0), st.floats(0.0, 10.0))
@settings(max_examples=50, deadline=None)
def test_pareto_min_plus_excess_is_mean(xm, alpha, s):
    d = Pareto(xm, alpha)
    assert d.expected_min(s) + d.excess_mean(s) == pytest.approx(d.mean, rel=1e-12)
    assert 0.0 <= d.partial_mean(s) <= d.mean * (1 + 1e-12)
