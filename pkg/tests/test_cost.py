import numpy as np
import pytest
from hypothesis import given, strategies as st

from bullwhipkit.config import EchelonConfig
from bullwhipkit.cost import (
    CostError,
    NewsvendorCost,
    PerishableCost,
    newsvendor_cost,
    perishable_cost,
    total_cost,
)


def test_newsvendor_examples():
    assert newsvendor_cost(0.15, 0.6, 10) == pytest.approx(1.5)
    assert newsvendor_cost(0.15, 0.6, -10) == pytest.approx(6.0)
    assert newsvendor_cost(0.15, 0.6, 0) == 0.0


def test_perishable_examples():
    # [DERIVED] 0.1 * 80 + 0.05 * (80 - 50)
    assert perishable_cost(0.1, 0.4, 0.05, 50, 80) == pytest.approx(9.5)
    assert perishable_cost(0.1, 0.4, 0.05, 50, 40) == pytest.approx(4.0)
    assert perishable_cost(0.1, 0.4, 0.05, 50, -5) == pytest.approx(2.0)


@given(st.floats(0, 10), st.floats(0.01, 10), st.floats(-1e5, 1e5))
def test_nonnegative(h, b, inv):
    assert newsvendor_cost(h, b, inv) >= 0
    assert perishable_cost(h, b, 0.05, 50, inv) >= newsvendor_cost(h, b, inv)


def test_fill_from_echelon():
    e = EchelonConfig("E", 2, 0.2, 0.8)
    c = NewsvendorCost().for_echelon(e)
    assert (c.holding_cost, c.backorder_cost) == (0.2, 0.8)
    c = NewsvendorCost(1.0, None).for_echelon(e)
    assert (c.holding_cost, c.backorder_cost) == (1.0, 0.8)
    np.testing.assert_allclose(c.compute(np.array([-1.0, 2.0])), [0.8, 2.0])


def test_invalid():
    with pytest.raises(CostError):
        NewsvendorCost(-1, 1)
    with pytest.raises(CostError):
        NewsvendorCost(0, 0)
    with pytest.raises(CostError):
        PerishableCost(gamma=-1)
    with pytest.raises(CostError):
        PerishableCost(buffer=-1)


def test_total_cost():
    c = np.arange(24, dtype=float).reshape(2, 3, 4)
    out = total_cost(c)
    assert out["per_path"].tolist() == [c[0].sum(), c[1].sum()]
    assert out["per_echelon"].shape == (2, 3)
    assert out["mean"] == pytest.approx(c.sum() / 2)
    with pytest.raises(CostError):
        total_cost(np.zeros((2, 3)))
    bad = c.copy()
    bad[0, 0, 0] = np.nan
    with pytest.raises(CostError):
        total_cost(bad)
