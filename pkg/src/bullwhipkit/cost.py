"""Per-period inventory cost functions."""

from __future__ import annotations

import copy

import numpy as np


class CostError(ValueError):
    pass


class CostFunction:
    """Cost of an end-of-period net inventory level (negative = backorders).

    ``holding_cost`` / ``backorder_cost`` left as None are filled from the
    echelon configuration by :meth:`for_echelon`.
    """

    def __init__(self, holding_cost: float | None = None, backorder_cost: float | None = None):
        for v in (holding_cost, backorder_cost):
            if v is not None and v < 0:
                raise CostError("holding and backorder costs must be nonnegative")
        if holding_cost is not None and backorder_cost is not None \
                and holding_cost + backorder_cost <= 0:
            raise CostError("holding_cost + backorder_cost must be positive")
        self.holding_cost = holding_cost
        self.backorder_cost = backorder_cost

    def for_echelon(self, echelon) -> "CostFunction":
        bound = copy.copy(self)
        if bound.holding_cost is None:
            bound.holding_cost = echelon.holding_cost
        if bound.backorder_cost is None:
            bound.backorder_cost = echelon.backorder_cost
        return bound

    def compute(self, inventory):
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class NewsvendorCost(CostFunction):
    def compute(self, inventory):
        inv = np.asarray(inventory, dtype=float)
        return self.holding_cost * np.maximum(inv, 0.0) + self.backorder_cost * np.maximum(-inv, 0.0)


class PerishableCost(NewsvendorCost):
    """Newsvendor cost plus ``gamma`` per unit held above ``buffer``."""

    def __init__(self, holding_cost=None, backorder_cost=None, gamma: float = 0.05, buffer: float = 50.0):
        super().__init__(holding_cost, backorder_cost)
        if gamma < 0:
            raise CostError("gamma must be nonnegative")
        if buffer < 0:
            raise CostError("buffer must be nonnegative")
        self.gamma = float(gamma)
        self.buffer = float(buffer)

    def compute(self, inventory):
        inv = np.asarray(inventory, dtype=float)
        return super().compute(inv) + self.gamma * np.maximum(inv - self.buffer, 0.0)

    def params(self):
        return {"gamma": self.gamma, "buffer": self.buffer}


def newsvendor_cost(holding_cost, backorder_cost, inventory) -> float:
    return float(NewsvendorCost(holding_cost, backorder_cost).compute(inventory))


def perishable_cost(holding_cost, backorder_cost, gamma, buffer, inventory) -> float:
    return float(PerishableCost(holding_cost, backorder_cost, gamma, buffer).compute(inventory))


def total_cost(costs) -> dict:
    """Sum an (N, K, T) cost tensor over echelons and periods.

    Returns per-path totals, per-echelon totals (N, K) and mean/std of the path totals.
    """
    c = np.asarray(costs, dtype=float)
    if c.ndim != 3:
        raise CostError(f"expected an (N, K, T) tensor, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise CostError("cost tensor contains non-finite values")
    per_echelon = c.sum(axis=2)
    per_path = per_echelon.sum(axis=1)
    std = float(per_path.std(ddof=1)) if per_path.size > 1 else 0.0
    return {
        "per_path": per_path,
        "per_echelon": per_echelon,
        "mean": float(per_path.mean()),
        "std": std,
    }
