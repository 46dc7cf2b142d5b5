"""Bullwhip metrics over a SimulationResult.

Echelons are 1-based here.  Every metric is computed per path over periods
``burn_in..T-1`` (``result.meta["burn_in"]``), then summarized across paths.
Variances use the n-1 denominator.  A zero-variance denominator gives 1 when
the numerator is also zero and +inf otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .forecast import UPSTREAM_WINDOW

# variances below (ZERO_REL * max|x|)^2 are treated as exactly zero
ZERO_REL = 1e-10


class MetricError(ValueError):
    pass


@dataclass
class MetricValue:
    name: str
    echelon: int | str
    per_path: np.ndarray
    mean: float
    median: float
    std: float
    cv: float

    @classmethod
    def summarize(cls, name, echelon, per_path) -> "MetricValue":
        x = np.asarray(per_path, dtype=float)
        with warnings.catch_warnings(), np.errstate(invalid="ignore"):
            warnings.simplefilter("ignore", RuntimeWarning)
            mean = float(np.mean(x))
            median = float(np.median(x))
            std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        cv = std / mean if mean != 0 and math.isfinite(mean) else math.nan
        return cls(name, echelon, x, mean, median, std, cv)

    def stat(self, which: str = "mean") -> float:
        if which not in ("mean", "median", "std", "cv"):
            raise MetricError(f"unknown summary statistic {which!r}")
        return getattr(self, which)


def _window(result):
    b = int(result.meta.get("burn_in", 0))
    if result.T - b < 2:
        raise MetricError(f"need at least 2 periods after burn-in, have {result.T - b}")
    return slice(b, None)


def path_variance(x: np.ndarray) -> np.ndarray:
    """Sample variance along the last axis, with negligible values snapped to 0."""
    x = np.asarray(x, dtype=float)
    v = x.var(axis=-1, ddof=1)
    scale = np.max(np.abs(x), axis=-1)
    return np.where(v <= (ZERO_REL * scale) ** 2, 0.0, v)


def variance_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return np.where(den == 0.0, np.where(num == 0.0, 1.0, np.inf), r)


def _k(result, k):
    if not 1 <= k <= result.K:
        raise MetricError(f"echelon {k} outside 1..{result.K}")
    return k - 1


def bwr_per_path(result, k: int) -> np.ndarray:
    j = _k(result, k)
    w = _window(result)
    orders = result.orders[:, j, w]
    seen = result.demand[:, w] if j == 0 else result.orders[:, j - 1, w]
    return variance_ratio(path_variance(orders), path_variance(seen))


def bwr(result, k: int) -> MetricValue:
    return MetricValue.summarize("bwr", k, bwr_per_path(result, k))


def cumulative_bwr(result, k: int | None = None, check: bool = True) -> MetricValue:
    """Product of BWR_1..BWR_k, cross-checked against Var(O_k) / Var(D)."""
    k = result.K if k is None else k
    _k(result, k)
    ratios = np.stack([bwr_per_path(result, j) for j in range(1, k + 1)])
    with np.errstate(invalid="ignore"):
        prod = np.prod(ratios, axis=0)
    if check:
        w = _window(result)
        stack = np.concatenate([result.demand[:, None, w], result.orders[:, :k, w]], axis=1)
        v = path_variance(stack)  # (N, k + 1)
        ok = np.all(v > 0, axis=1) & np.all(np.isfinite(v), axis=1)
        if np.any(ok):
            tele = v[ok, -1] / v[ok, 0]
            rel = np.abs(prod[ok] - tele) / np.abs(tele)
            if np.max(rel) > 1e-9:
                raise MetricError(f"telescoping identity violated (max rel error {np.max(rel):.3g})")
    return MetricValue.summarize("cum_bwr", k, prod)


def nsamp(result, k: int) -> MetricValue:
    j = _k(result, k)
    w = _window(result)
    seen = result.demand[:, w] if j == 0 else result.orders[:, j - 1, w]
    r = variance_ratio(path_variance(result.inventory[:, j, w]), path_variance(seen))
    return MetricValue.summarize("nsamp", k, r)


def fill_rate(result, k: int) -> MetricValue:
    j = _k(result, k)
    b = int(result.meta.get("burn_in", 0))
    inv = result.inventory[:, j, b:]
    return MetricValue.summarize("fill_rate", k, np.mean(inv >= 0.0, axis=1))


def echelon_cost(result, k: int) -> MetricValue:
    """Total cost incurred at echelon k over the metric window."""
    j = _k(result, k)
    b = int(result.meta.get("burn_in", 0))
    return MetricValue.summarize("tc", k, result.costs[:, j, b:].sum(axis=1))


def cumulative_cost(result, k: int) -> MetricValue:
    """Total cost of echelons 1..k over the metric window; k = K is the chain total."""
    j = _k(result, k)
    b = int(result.meta.get("burn_in", 0))
    return MetricValue.summarize("tc", k, result.costs[:, : j + 1, b:].sum(axis=(1, 2)))


def chain_cost(result) -> MetricValue:
    b = int(result.meta.get("burn_in", 0))
    return MetricValue.summarize("tc", "chain", result.costs[:, :, b:].sum(axis=(1, 2)))


def chen_lower_bound(lead_time: int, window: int) -> float:
    """1 + 2(L+1)/p + 2(L+1)^2/p^2 for OUT with a moving average of window p."""
    if lead_time < 0 or window < 1:
        raise MetricError(f"need L >= 0 and p >= 1, got L={lead_time}, p={window}")
    r = (lead_time + 1) / window
    return 1.0 + 2.0 * r + 2.0 * r * r


# --- registry-facing metric objects -------------------------------------------------


class Metric:
    name = ""

    def compute(self, result, k: int) -> MetricValue:
        raise NotImplementedError


class BWRMetric(Metric):
    name = "bwr"

    def compute(self, result, k):
        return bwr(result, k)


class CumulativeBWRMetric(Metric):
    name = "cum_bwr"

    def compute(self, result, k):
        return cumulative_bwr(result, k)


class NSAmpMetric(Metric):
    name = "nsamp"

    def compute(self, result, k):
        return nsamp(result, k)


class FillRateMetric(Metric):
    name = "fill_rate"

    def compute(self, result, k):
        return fill_rate(result, k)


class TotalCostMetric(Metric):
    """Cost accumulated through echelon k, mirroring cum_bwr; echelon K is the chain total."""

    name = "tc"

    def compute(self, result, k):
        return cumulative_cost(result, k)


class ChenLowerBoundMetric(Metric):
    """Config-level bound attached to every path.

    Echelon 1 uses the forecaster's window when it has one (else ``window``);
    upstream echelons use the 8-order rolling window they forecast with.
    """

    name = "chen_lower_bound"

    def __init__(self, window: int = 52):
        self.window = int(window)

    def compute(self, result, k):
        j = _k(result, k)
        if j == 0:
            p = result.meta.get("forecast_window") or self.window
        else:
            p = result.meta.get("upstream_window", UPSTREAM_WINDOW)
        value = chen_lower_bound(result.config.echelons[j].lead_time, p)
        return MetricValue.summarize(self.name, k, np.full(result.N, value))
