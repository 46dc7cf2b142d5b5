"""End-customer demand generators.

Every generator is a pure function of ``(params, T, seed)``.  Randomness comes
from numpy's PCG64 bit generator; batch row ``i`` is always drawn from the
integer sub-seed ``derive_seed(base_seed, i)``, so a row never depends on how
many rows were requested.  Generated values are clamped at zero.
"""

from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SEASON_LENGTH = 52


class DemandError(ValueError):
    pass


def derive_seed(base_seed: int, index: int) -> int:
    """Sub-seed for path ``index``: first 64-bit word of SeedSequence([base, index])."""
    ss = np.random.SeedSequence([int(base_seed), int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class DemandBatch:
    values: np.ndarray  # (N, T)
    base_seed: int

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]


class DemandGenerator(ABC):
    """Base class.  Subclasses fill a whole (N, T) block from per-row RNGs."""

    @abstractmethod
    def _generate_rows(self, T: int, rngs: list) -> np.ndarray:
        ...

    @property
    def prior(self) -> tuple[float, float]:
        """(mean, std) used to warm-start forecasts and the initial chain state."""
        raise NotImplementedError

    def generate(self, T: int, seed: int = 0) -> np.ndarray:
        _check_T(T)
        return self._generate_rows(T, [_rng(seed)])[0]

    def generate_batch(self, T: int, N: int, base_seed: int = 0) -> DemandBatch:
        _check_T(T)
        if N < 1:
            raise DemandError(f"N must be >= 1, got {N}")
        rngs = [_rng(derive_seed(base_seed, i)) for i in range(N)]
        return DemandBatch(self._generate_rows(T, rngs), int(base_seed))


def generate_batch(generator: DemandGenerator, T: int, N: int, base_seed: int = 0) -> DemandBatch:
    return generator.generate_batch(T, N, base_seed)


def _check_T(T):
    if int(T) != T or T < 1:
        raise DemandError(f"T must be an integer >= 1, got {T!r}")


def _normals(rngs, T):
    return np.stack([r.standard_normal(T) for r in rngs])


class AR1Demand(DemandGenerator):
    """AR(1) around ``mu`` with additive seasonality and a permanent level shock.

    D(t) = mu + phi (D(t-1) - mu) + A sin(2 pi t / season) + delta(t) + eps(t),
    delta(t) = shock_magnitude * mu for t >= shock_period.  The recursion runs on
    the unclamped process; only the returned values are clamped at zero.
    """

    def __init__(
        self,
        mu: float = 100.0,
        phi: float = 0.3,
        seasonal_amplitude: float = 10.0,
        noise_std: float = 10.0,
        shock_magnitude: float = 0.3,
        shock_period: int | None = 104,
        season_length: int = SEASON_LENGTH,
        initial: float | None = None,
    ):
        if not 0.0 <= phi < 1.0:
            raise DemandError(f"phi must lie in [0, 1), got {phi}")
        if noise_std < 0:
            raise DemandError("noise_std must be nonnegative")
        if season_length < 1:
            raise DemandError("season_length must be >= 1")
        self.mu = float(mu)
        self.phi = float(phi)
        self.seasonal_amplitude = float(seasonal_amplitude)
        self.noise_std = float(noise_std)
        self.shock_magnitude = float(shock_magnitude)
        self.shock_period = None if shock_period is None else int(shock_period)
        self.season_length = int(season_length)
        self.initial = self.mu if initial is None else float(initial)

    @property
    def prior(self):
        return self.mu, self.noise_std

    def shock(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t)
        if self.shock_period is None:
            return np.zeros(t.shape)
        return np.where(t >= self.shock_period, self.shock_magnitude * self.mu, 0.0)

    def _generate_rows(self, T, rngs):
        eps = self.noise_std * _normals(rngs, T)
        t = np.arange(1, T + 1)
        drive = (
            self.seasonal_amplitude * np.sin(2.0 * np.pi * t / self.season_length)
            + self.shock(t)
        )
        out = np.empty_like(eps)
        prev = np.full(eps.shape[0], self.initial)
        for j in range(T):
            prev = self.mu + self.phi * (prev - self.mu) + drive[j] + eps[:, j]
            out[:, j] = prev
        return np.maximum(out, 0.0)


class IIDNormalDemand(DemandGenerator):
    def __init__(self, mu: float = 100.0, sigma: float = 10.0):
        if sigma < 0:
            raise DemandError("sigma must be nonnegative")
        self.mu = float(mu)
        self.sigma = float(sigma)

    @property
    def prior(self):
        return self.mu, self.sigma

    def _generate_rows(self, T, rngs):
        return np.maximum(self.mu + self.sigma * _normals(rngs, T), 0.0)


class BeerGameDemand(DemandGenerator):
    """Deterministic step: ``low`` before ``step_period``, ``high`` from it on (1-based)."""

    def __init__(self, low: float = 4.0, high: float = 8.0, step_period: int = 5):
        self.low = float(low)
        self.high = float(high)
        self.step_period = int(step_period)

    @property
    def prior(self):
        return self.low, 0.0

    def _generate_rows(self, T, rngs):
        t = np.arange(1, T + 1)
        row = np.where(t < self.step_period, self.low, self.high)
        return np.tile(row, (len(rngs), 1))


class ARMADemand(DemandGenerator):
    """ARMA(p, q) around ``mu``: x(t) = sum ar_j x(t-j) + e(t) + sum ma_j e(t-j).

    Pre-sample values are zero; ``burn_in`` leading periods are simulated and
    discarded so the returned window is close to stationary.
    """

    def __init__(self, ar=(), ma=(), mu: float = 100.0, sigma: float = 10.0, burn_in: int = 100):
        self.ar = [float(a) for a in ar]
        self.ma = [float(m) for m in ma]
        if sigma < 0:
            raise DemandError("sigma must be nonnegative")
        if self.ar:
            # characteristic polynomial 1 - a1 z - ... - ap z^p, roots must lie outside |z| = 1
            coeffs = np.r_[1.0, -np.asarray(self.ar)][::-1]
            roots = np.roots(coeffs)
            if np.any(np.abs(roots) <= 1.0):
                raise DemandError(f"nonstationary AR coefficients {self.ar}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.burn_in = int(burn_in)

    @property
    def prior(self):
        return self.mu, self.sigma

    def _generate_rows(self, T, rngs):
        total = T + self.burn_in
        e = self.sigma * _normals(rngs, total)
        p, q = len(self.ar), len(self.ma)
        x = np.zeros_like(e)
        for t in range(total):
            val = e[:, t].copy()
            for j in range(1, p + 1):
                if t - j >= 0:
                    val += self.ar[j - 1] * x[:, t - j]
            for j in range(1, q + 1):
                if t - j >= 0:
                    val += self.ma[j - 1] * e[:, t - j]
            x[:, t] = val
        return np.maximum(self.mu + x[:, self.burn_in:], 0.0)


class ReplayDemand(DemandGenerator):
    """Cyclic replay of a historical series with multiplicative Gaussian noise."""

    def __init__(self, data, noise_fraction: float = 0.0):
        data = np.asarray(data, dtype=float).ravel()
        if data.size == 0:
            raise DemandError("replay source is empty")
        if noise_fraction < 0:
            raise DemandError("noise_fraction must be nonnegative")
        self.data = data
        self.noise_fraction = float(noise_fraction)

    @property
    def prior(self):
        sd = float(self.data.std(ddof=1)) if self.data.size > 1 else 0.0
        return float(self.data.mean()), sd

    def _generate_rows(self, T, rngs):
        idx = np.arange(T) % self.data.size
        base = self.data[idx]
        if self.noise_fraction == 0.0:
            return np.tile(np.maximum(base, 0.0), (len(rngs), 1))
        noise = self.noise_fraction * _normals(rngs, T)
        return np.maximum(base * (1.0 + noise), 0.0)


def replay(source, T: int, noise_fraction: float = 0.0, seed: int = 0) -> np.ndarray:
    return ReplayDemand(source, noise_fraction).generate(T, seed)


def generate_ar1(T: int, seed: int = 0, **params) -> np.ndarray:
    return AR1Demand(**params).generate(T, seed)


def generate_iid_normal(mu: float, sigma: float, T: int, seed: int = 0) -> np.ndarray:
    return IIDNormalDemand(mu, sigma).generate(T, seed)


def generate_beer_game(T: int, step_period: int = 5) -> np.ndarray:
    return BeerGameDemand(step_period=step_period).generate(T, 0)


def generate_arma(ar, ma, mu: float, sigma: float, T: int, seed: int = 0) -> np.ndarray:
    return ARMADemand(ar, ma, mu, sigma).generate(T, seed)


def read_replay_csv(path) -> np.ndarray:
    """Read a ``value`` column (an optional ``period`` column is ignored)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "value" not in reader.fieldnames:
            raise DemandError(f"{path}: replay CSV needs a 'value' column")
        values = []
        for lineno, row in enumerate(reader, start=2):
            try:
                v = float(row["value"])
            except (TypeError, ValueError):
                raise DemandError(f"{path}:{lineno}: bad value {row['value']!r}") from None
            if v < 0 or not math.isfinite(v):
                raise DemandError(f"{path}:{lineno}: value must be finite and nonnegative")
            values.append(v)
    if not values:
        raise DemandError(f"{path}: no rows")
    return np.array(values)


def load_regime_switching() -> np.ndarray:
    """Bundled 60-period synthetic regime-switching series.

    Synthetic stand-in for monthly industry billings, not real data: a
    two-state Markov-switching mean (levels 80 and 130, stay probability 0.9)
    plus i.i.d. Normal(0, 8) noise, drawn once from PCG64 seed 2024.
    """
    return read_replay_csv(Path(__file__).parent / "data" / "regime_switching_60.csv")
