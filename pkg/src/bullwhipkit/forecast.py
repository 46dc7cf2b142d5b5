"""Mean / standard-deviation demand forecasters.

Scalar API: ``forecaster.forecast(history, prior)`` where ``history`` holds
observations through period t-1.  Batch API: ``generate_forecasts`` fills an
(N, T) pair of arrays in which column t only uses demand columns < t.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-6
MAD_TO_STD = 1.2533  # sqrt(pi / 2) for the normal distribution
UPSTREAM_WINDOW = 8


class ForecastError(ValueError):
    pass


@dataclass(frozen=True)
class ForecastPair:
    mean: float
    std: float


@dataclass(frozen=True)
class ForecastBatch:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        if self.means.shape != self.stds.shape:
            raise ForecastError("means and stds must have the same shape")


def _floor(std):
    return np.maximum(std, SIGMA_FLOOR)


def _sample_stats(values) -> ForecastPair:
    x = np.asarray(values, dtype=float)
    if x.size == 1:
        return ForecastPair(float(x[0]), SIGMA_FLOOR)
    return ForecastPair(float(x.mean()), float(_floor(x.std(ddof=1))))


def _warmup(history, prior):
    """Forecast for fewer than two observations, or None once statistics exist."""
    n = len(history)
    if n == 0:
        if prior is None:
            raise ForecastError("empty history and no prior")
        return ForecastPair(float(prior[0]), float(_floor(prior[1])))
    if n == 1 and prior is not None:
        return ForecastPair(float(history[0]), float(_floor(prior[1])))
    return None


class Forecaster(ABC):
    #: False for forecasters that peek at the whole demand series.
    causal = True

    @abstractmethod
    def forecast(self, history, prior=None) -> ForecastPair:
        ...

    def forecast_batch(self, demand: np.ndarray, prior) -> ForecastBatch:
        """Generic path: apply :meth:`forecast` to every prefix of every row."""
        N, T = demand.shape
        means = np.empty((N, T))
        stds = np.empty((N, T))
        for i in range(N):
            p = _row_prior(prior, i)
            for t in range(T):
                fp = self.forecast(demand[i, :t], p)
                means[i, t], stds[i, t] = fp.mean, fp.std
        return ForecastBatch(means, stds)


def _row_prior(prior, i):
    if prior is None:
        return None
    m, s = prior
    return (float(np.asarray(m).reshape(-1)[i] if np.ndim(m) else m),
            float(np.asarray(s).reshape(-1)[i] if np.ndim(s) else s))


class NaiveForecaster(Forecaster):
    """Expanding-window sample mean and standard deviation."""

    def forecast(self, history, prior=None):
        history = np.asarray(history, dtype=float)
        if history.size == 0 and prior is None:
            raise ForecastError("naive forecast needs a nonempty history")
        warm = _warmup(history, prior)
        return warm if warm is not None else _sample_stats(history)

    def forecast_batch(self, demand, prior):
        N, T = demand.shape
        means = np.empty((N, T))
        stds = np.empty((N, T))
        m0, s0 = _broadcast_prior(prior, N)
        means[:, 0], stds[:, 0] = m0, _floor(s0)
        if T > 1:
            means[:, 1], stds[:, 1] = demand[:, 0], _floor(s0)
        # Welford running moments over columns 0..t-1
        mean = demand[:, 0].copy()
        m2 = np.zeros(N)
        for t in range(2, T):
            x = demand[:, t - 1]
            n = t
            delta = x - mean
            mean = mean + delta / n
            m2 = m2 + delta * (x - mean)
            means[:, t] = mean
            stds[:, t] = _floor(np.sqrt(np.maximum(m2 / (n - 1), 0.0)))
        return ForecastBatch(means, stds)


class MovingAverageForecaster(Forecaster):
    def __init__(self, window: int = 10):
        if int(window) != window or window < 2:
            raise ForecastError(f"moving-average window must be an integer >= 2, got {window}")
        self.window = int(window)

    def forecast(self, history, prior=None):
        history = np.asarray(history, dtype=float)
        if history.size == 0 and prior is None:
            raise ForecastError("moving-average forecast needs a nonempty history")
        warm = _warmup(history, prior)
        return warm if warm is not None else _sample_stats(history[-self.window:])

    def forecast_batch(self, demand, prior):
        return _rolling_batch(demand, prior, self.window)


def _broadcast_prior(prior, N):
    if prior is None:
        raise ForecastError("batch forecasting needs a prior (mean, std)")
    m, s = prior
    return (np.broadcast_to(np.asarray(m, dtype=float), (N,)).copy(),
            np.broadcast_to(np.asarray(s, dtype=float), (N,)).copy())


def _rolling_batch(demand, prior, window):
    N, T = demand.shape
    means = np.empty((N, T))
    stds = np.empty((N, T))
    m0, s0 = _broadcast_prior(prior, N)
    means[:, 0], stds[:, 0] = m0, _floor(s0)
    if T > 1:
        means[:, 1], stds[:, 1] = demand[:, 0], _floor(s0)
    for t in range(2, T):
        w = demand[:, max(0, t - window):t]
        means[:, t] = w.mean(axis=1)
        stds[:, t] = _floor(w.std(axis=1, ddof=1))
    return ForecastBatch(means, stds)


class ExpSmoothingForecaster(Forecaster):
    """Simple exponential smoothing; std from a smoothed absolute deviation.

    level l_t = a x_t + (1 - a) l_{t-1} with l_1 = x_1, and
    d_t = a |x_t - l_{t-1}| + (1 - a) d_{t-1}; std = 1.2533 d_t.
    d_1 is the prior std converted to a mean absolute deviation (0 without a prior).
    """

    def __init__(self, alpha: float = 0.3):
        if not 0.0 < alpha <= 1.0:
            raise ForecastError(f"alpha must lie in (0, 1], got {alpha}")
        self.alpha = float(alpha)

    def forecast(self, history, prior=None):
        history = np.asarray(history, dtype=float)
        if history.size == 0:
            if prior is None:
                raise ForecastError("exponential smoothing needs a nonempty history")
            return ForecastPair(float(prior[0]), float(_floor(prior[1])))
        a = self.alpha
        level = history[0]
        dev = 0.0 if prior is None else prior[1] / MAD_TO_STD
        for x in history[1:]:
            dev = a * abs(x - level) + (1 - a) * dev
            level = level + a * (x - level)
        return ForecastPair(float(level), float(_floor(MAD_TO_STD * dev)))

    def forecast_batch(self, demand, prior):
        N, T = demand.shape
        a = self.alpha
        means = np.empty((N, T))
        stds = np.empty((N, T))
        m0, s0 = _broadcast_prior(prior, N)
        means[:, 0], stds[:, 0] = m0, _floor(s0)
        if T == 1:
            return ForecastBatch(means, stds)
        level = demand[:, 0].copy()
        dev = s0 / MAD_TO_STD
        means[:, 1], stds[:, 1] = level, _floor(MAD_TO_STD * dev)
        for t in range(2, T):
            x = demand[:, t - 1]
            dev = a * np.abs(x - level) + (1 - a) * dev
            level = level + a * (x - level)
            means[:, t] = level
            stds[:, t] = _floor(MAD_TO_STD * dev)
        return ForecastBatch(means, stds)


class GlobalConstantForecaster(Forecaster):
    """Mean and std of every demand value in the batch (leaks future data)."""

    causal = False

    def forecast(self, history, prior=None):
        return _sample_stats(history)

    def forecast_batch(self, demand, prior):
        fp = _sample_stats(demand.ravel())
        return ForecastBatch(np.full(demand.shape, fp.mean), np.full(demand.shape, fp.std))


class PathConstantForecaster(Forecaster):
    """Per-path mean and std of the full series (leaks future data)."""

    causal = False

    def forecast(self, history, prior=None):
        return _sample_stats(history)

    def forecast_batch(self, demand, prior):
        m = demand.mean(axis=1, keepdims=True)
        s = _floor(demand.std(axis=1, ddof=1, keepdims=True)) if demand.shape[1] > 1 \
            else np.full((demand.shape[0], 1), SIGMA_FLOOR)
        return ForecastBatch(np.broadcast_to(m, demand.shape).copy(),
                             np.broadcast_to(s, demand.shape).copy())


class DeepARForecaster(Forecaster):
    """Registry hook for a trained probabilistic sequence model; none ships."""

    def __init__(self, **params):
        raise NotImplementedError(
            "no DeepAR model ships with bullwhipkit; register a Forecaster subclass "
            "wrapping your trained model under a new name"
        )

    def forecast(self, history, prior=None):  # pragma: no cover
        raise NotImplementedError


def naive_forecast(history) -> ForecastPair:
    return NaiveForecaster().forecast(history)


def moving_average_forecast(history, window: int) -> ForecastPair:
    return MovingAverageForecaster(window).forecast(history)


def exp_smoothing_forecast(history, alpha: float) -> ForecastPair:
    return ExpSmoothingForecaster(alpha).forecast(history)


def rolling_upstream_estimate(recent_orders, window: int = UPSTREAM_WINDOW,
                              prior=(0.0, SIGMA_FLOOR)) -> ForecastPair:
    """Statistics of the last ``window`` orders received; ``prior`` until two exist."""
    orders = np.asarray(recent_orders, dtype=float)[-window:]
    warm = _warmup(orders, prior)
    return warm if warm is not None else _sample_stats(orders)


def generate_forecasts(forecaster: Forecaster, demand, prior=None) -> ForecastBatch:
    """Causal forecasts for every (path, period) of a demand matrix.

    ``prior`` is the (mean, std) used before any history exists; it may be
    scalars or per-path arrays.  Leaky forecasters ignore it.
    """
    values = demand.values if hasattr(demand, "values") else np.asarray(demand, dtype=float)
    if values.ndim == 1:
        values = values[None, :]
    if values.size == 0:
        raise ForecastError("demand is empty")
    if prior is None and forecaster.causal:
        prior = (values[:, 0], np.full(values.shape[0], SIGMA_FLOOR))
    return forecaster.forecast_batch(values, prior)
