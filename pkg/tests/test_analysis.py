import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bullwhipkit.analysis import (
    AnalysisError,
    RadicandWarning,
    cumulative_concentration_report,
    delta_cv_product,
    delta_cv_ratio,
    filtering_report,
)
from bullwhipkit.demand import AR1Demand
from bullwhipkit.engine import SimulationResult, run_montecarlo
from bullwhipkit.forecast import NaiveForecaster

from conftest import make_chain

cv = st.floats(0, 2)
rho = st.floats(-1, 1)


def test_ratio_examples():
    assert delta_cv_ratio(0.3, 0.3, 1.0) == 0.0
    # [PAPER] stochastic filtering table, E3 row predicted CV 0.011
    # the table reports two significant figures
    assert delta_cv_ratio(0.145, 0.146, 0.997) == pytest.approx(0.011, abs=5e-4)
    # [DERIVED] sqrt(0.05)
    assert delta_cv_ratio(0.1, 0.2, 0.0) == pytest.approx(math.sqrt(0.05))


@given(cv, cv, rho)
def test_ratio_symmetric(a, b, r):
    assert delta_cv_ratio(a, b, r) == pytest.approx(delta_cv_ratio(b, a, r), abs=1e-12)


@given(cv, cv)
def test_ratio_extremes(a, b):
    assert delta_cv_ratio(a, b, 1.0) == pytest.approx(abs(a - b), abs=1e-7)
    assert delta_cv_ratio(a, b, -1.0) == pytest.approx(a + b, abs=1e-12)


def test_ratio_errors():
    with pytest.raises(AnalysisError):
        delta_cv_ratio(0.1, 0.1, 1.5)
    with pytest.raises(AnalysisError):
        delta_cv_ratio(-0.1, 0.1, 0.0)


def test_negative_radicand_clamped():
    # not positive semidefinite: 3 + 6 * (-0.9) < 0
    R = np.full((3, 3), -0.9) + 1.9 * np.eye(3)
    with pytest.warns(RadicandWarning):
        assert delta_cv_product([1.0, 1.0, 1.0], R) == 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert delta_cv_ratio(0.0, 0.0, 0.5) == 0.0


def test_product_examples():
    # [DERIVED] sqrt(0.02)
    assert delta_cv_product([0.1, 0.1], np.eye(2)) == pytest.approx(math.sqrt(0.02))
    assert delta_cv_product([0.37], [[1.0]]) == pytest.approx(0.37)
    assert delta_cv_product([0, 0, 0], np.eye(3)) == 0.0


@given(st.lists(st.floats(0, 3), min_size=1, max_size=6))
def test_product_identity_is_rss(cvs):
    assert delta_cv_product(cvs, np.eye(len(cvs))) == pytest.approx(math.sqrt(sum(c * c for c in cvs)))


@given(cv, cv, rho)
def test_product_two_factors(a, b, r):
    # [DERIVED] K=2 expands to a^2 + b^2 + 2 r a b, the ratio formula with rho -> -rho
    R = np.array([[1.0, r], [r, 1.0]])
    assert delta_cv_product([a, b], R) == pytest.approx(delta_cv_ratio(a, b, -r), abs=1e-7)


def test_product_errors():
    with pytest.raises(AnalysisError):
        delta_cv_product([0.1, 0.1], np.eye(3))
    with pytest.raises(AnalysisError):
        delta_cv_product([0.1, 0.1], [[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(AnalysisError):
        delta_cv_product([0.1, 0.1], [[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(AnalysisError):
        delta_cv_product([0.1, 0.1], [[1.0, 1.2], [1.2, 1.0]])


def lognormal_ratio_cv(c, r):
    """[DERIVED] exact CV of X/Y for lognormal X, Y with CV c and correlation r."""
    s2 = math.log1p(c * c)
    r_log = math.log1p(r * (math.exp(s2) - 1.0)) / s2
    return math.sqrt(math.expm1(2.0 * s2 * (1.0 - r_log)))


def test_lognormal_oracle():
    c, r = 0.1, 0.9
    exact = lognormal_ratio_cv(c, r)
    assert delta_cv_ratio(c, c, r) == pytest.approx(exact, rel=0.10)
    s2 = math.log1p(c * c)
    r_log = math.log1p(r * (math.exp(s2) - 1.0)) / s2
    z = np.random.default_rng(0).multivariate_normal(
        [0, 0], s2 * np.array([[1, r_log], [r_log, 1]]), size=200_000)
    ratio = np.exp(z[:, 0] - z[:, 1])
    emp = ratio.std(ddof=1) / ratio.mean()
    assert delta_cv_ratio(c, c, r) == pytest.approx(emp, rel=0.10)


def test_filtering_report_shape(semi):
    res = run_montecarlo(semi, AR1Demand(), NaiveForecaster(), T=104, N=60, seed=3)
    rep = filtering_report(res)
    assert [r.echelon for r in rep.rows] == [2, 3, 4]
    for r in rep.rows:
        assert -1 <= r.rho <= 1 and r.predicted_cv >= 0
    lines = rep.to_csv().splitlines()
    assert lines[0] == "echelon,cv_x,cv_y,rho,predicted_cv,empirical_cv"
    assert len(lines) == 4


def test_filtering_needs_paths(semi):
    res = run_montecarlo(semi, AR1Demand(), NaiveForecaster(), T=30, N=10, seed=3)
    with pytest.raises(AnalysisError):
        filtering_report(res)
    with pytest.raises(AnalysisError):
        cumulative_concentration_report(res)


def test_filtering_identical_paths():
    T, N = 20, 40
    D = np.tile(np.sin(np.arange(T)) + 5.0, (N, 1))
    orders = np.stack([D, 2 * D], axis=1)
    res = SimulationResult(orders, np.zeros_like(orders), np.zeros_like(orders), D, make_chain([1, 1]))
    row = filtering_report(res).row(2)
    assert row.empirical_cv == 0.0
    assert row.predicted_cv == pytest.approx(0.0, abs=1e-12)


def test_concentration_independent_factors():
    rng = np.random.default_rng(4)
    N, T = 400, 60
    D = rng.normal(100, 10, (N, T))
    s1 = rng.lognormal(0, 0.2, N)[:, None]
    s2 = rng.lognormal(0, 0.2, N)[:, None]
    o1 = 100 + (D - 100) * s1
    o2 = 100 + (o1 - 100) * s2
    res = SimulationResult(np.stack([o1, o2], 1), np.zeros((N, 2, T)), np.zeros((N, 2, T)), D,
                           make_chain([1, 1]))
    rep = cumulative_concentration_report(res)
    assert abs(rep.corr[0, 1]) < 0.15
    assert rep.predicted_cv == pytest.approx(rep.naive_cv, rel=0.1)
