import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from bullwhipkit.policy import (
    ConstantOrder,
    OrderUpTo,
    PolicyError,
    ProportionalOUT,
    SmoothingOUT,
    constant_order,
    out_level,
    out_order,
    pout_order,
    safety_factor,
    smoothing_out_order,
)

mpmath.mp.dps = 40


def mp_quantile(p):
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))


def test_safety_factor_examples():
    assert safety_factor(0.5) == 0.0
    # [DERIVED] high-precision quantile oracle
    assert safety_factor(0.8) == pytest.approx(0.841621, abs=1e-6)
    assert safety_factor(0.975) == pytest.approx(1.959964, abs=1e-6)


@pytest.mark.parametrize("p", np.linspace(0.001, 0.999, 199))
def test_safety_factor_vs_mpmath(p):
    assert abs(safety_factor(p) - mp_quantile(p)) <= 1e-8


@given(st.floats(1e-6, 1 - 1e-6))
def test_safety_factor_vs_scipy(p):
    assert safety_factor(p) == pytest.approx(norm.ppf(p), abs=1e-8)


@given(st.floats(1e-6, 0.5))
def test_safety_factor_odd(p):
    assert abs(safety_factor(1 - p) + safety_factor(p)) <= 1e-8


@given(st.floats(1e-4, 0.9999), st.floats(1e-4, 0.9999))
def test_safety_factor_monotone(a, b):
    if a < b:
        assert safety_factor(a) < safety_factor(b)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_safety_factor_range(p):
    with pytest.raises(PolicyError):
        safety_factor(p)


def test_out_level_example():
    # [DERIVED] 300 + 0.841621 * 10 * sqrt(3)
    assert out_level(2, 0.8, 100, 10) == pytest.approx(314.578, abs=1e-3)
    assert out_level(2, 0.8, 100, 0) == 300.0
    assert out_level(2, 0.5, 100, 37) == 300.0


def test_out_order_examples():
    assert out_order(2, 0.8, 250, 100, 10) == pytest.approx(64.578, abs=1e-3)
    assert out_order(2, 0.8, 400, 100, 10) == 0.0
    assert out_order(2, 0.8, 0, 0, 0) == 0.0


def test_pout_examples():
    assert pout_order(2, 0.8, 1.0, 250, 100, 10) == out_order(2, 0.8, 250, 100, 10)
    assert pout_order(2, 0.8, 0.5, 250, 100, 10) == pytest.approx(32.289, abs=1e-3)
    assert pout_order(2, 0.8, 0.3, 500, 100, 10) == 0.0


def test_smoothing_examples():
    assert smoothing_out_order(2, 0.8, 1.0, 250, 100, 10, 55.0) == out_order(2, 0.8, 250, 100, 10)
    # O_out = 100 when ip = S - 100
    S = out_level(1, 0.5, 50, 0)
    assert smoothing_out_order(1, 0.5, 0.3, S - 100, 50, 0, 0.0) == pytest.approx(30.0)
    o = 0.0
    for _ in range(200):
        o = smoothing_out_order(1, 0.5, 0.3, S - 100, 50, 0, o)
    assert o == pytest.approx(100.0)


def test_constant_examples():
    assert constant_order(100) == 100
    assert constant_order(0) == 0
    p = ConstantOrder(42.0).bind(3, 0.7)
    assert np.all(p.compute_order(np.array([0.0, 1e6]), 1.0, 1.0, 9.0) == 42.0)
    # None means "use the prior mean", which the engine passes as previous_order
    assert ConstantOrder().bind(3, 0.7).compute_order(5.0, 1.0, 1.0, 77.0) == 77.0


@given(st.floats(-1e4, 1e4), st.floats(0, 500), st.floats(0, 100), st.floats(0.01, 1.0),
       st.floats(0, 500))
def test_policies_nonnegative(ip, fm, fs, a, prev):
    for pol in (OrderUpTo(), ProportionalOUT(a), SmoothingOUT(a)):
        b = pol.bind(4, 0.8)
        assert b.compute_order(ip, fm, fs, prev) >= 0


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_out_monotone_in_ip(a, b):
    p = OrderUpTo(3, 0.8)
    lo, hi = min(a, b), max(a, b)
    assert p.compute_order(lo, 100, 10) >= p.compute_order(hi, 100, 10)


def test_vector_binding_matches_scalar():
    L = np.array([2, 4, 12, 8])
    f = np.array([0.8, 0.806, 0.833, 0.857])
    vec = OrderUpTo().bind(L, f)
    ip = np.array([[250.0, 400.0, 1300.0, 800.0]])
    got = vec.compute_order(ip, 100.0, 10.0)
    for k in range(4):
        assert got[0, k] == pytest.approx(out_order(int(L[k]), f[k], ip[0, k], 100, 10), rel=1e-14)


def test_invalid_alpha():
    for a in (0.0, 1.5):
        with pytest.raises(PolicyError):
            ProportionalOUT(a)
        with pytest.raises(PolicyError):
            SmoothingOUT(a)
    with pytest.raises(PolicyError):
        ConstantOrder(-1)
    with pytest.raises(PolicyError):
        OrderUpTo().order_up_to_level(1, 1)
