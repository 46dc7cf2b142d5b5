"""Named experiment protocols shared by the CLI and the acceptance suite."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from . import metrics
from .analysis import cumulative_concentration_report, filtering_report
from .config import ChainConfig, EchelonConfig, builtin_chain
from .demand import AR1Demand, IIDNormalDemand, ReplayDemand, load_regime_switching
from .engine import run_montecarlo
from .forecast import (
    GlobalConstantForecaster,
    MovingAverageForecaster,
    NaiveForecaster,
    PathConstantForecaster,
)
from .policy import ConstantOrder, OrderUpTo, ProportionalOUT, SmoothingOUT

CHEN_PAIRS = ((2, 10), (4, 10), (4, 20), (8, 20), (8, 52), (12, 52), (2, 52), (12, 10))
LEAD_TIME_SCENARIOS = {
    "short": (1, 2, 4, 2),
    "baseline": (2, 4, 12, 8),
    "long": (4, 8, 20, 12),
}


@dataclass
class ChenRow:
    L: int
    p: int
    bound: float
    simulated: float

    @property
    def rel_error(self) -> float:
        return (self.simulated - self.bound) / self.bound


def validate_chen(pairs=CHEN_PAIRS, N: int = 2000, T: int = 520, mu: float = 100.0,
                  sigma: float = 10.0, seed: int = 0, workers: int = 1) -> list[ChenRow]:
    """Single echelon, i.i.d. Normal demand, MA(p) forecasts, OUT with z = 0.

    Each run simulates ``p + T`` periods and measures the last ``T`` so that the
    moving average always has a full window.
    """
    rows = []
    for L, p in pairs:
        chain = ChainConfig("single_echelon", (EchelonConfig("retailer", int(L), 1.0, 1.0),))
        res = run_montecarlo(chain, IIDNormalDemand(mu, sigma), MovingAverageForecaster(p),
                             OrderUpTo(), T=p + T, N=N, seed=seed, burn_in=p, workers=workers)
        rows.append(ChenRow(int(L), int(p), metrics.chen_lower_bound(L, p), metrics.bwr(res, 1).mean))
    return rows


def chen_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "p", "bound", "simulated", "rel_error"])
    for r in rows:
        w.writerow([r.L, r.p, repr(r.bound), repr(r.simulated), repr(r.rel_error)])
    return buf.getvalue()


def single_path(chain: ChainConfig | None = None, generator=None, T: int = 156, seed: int = 42):
    """One demand path with a per-path constant forecast (the leaky single-path protocol)."""
    chain = chain or builtin_chain("semiconductor_4tier")
    return run_montecarlo(chain, generator or AR1Demand(), PathConstantForecaster(), OrderUpTo(),
                          T=T, N=1, seed=seed)


def filtering_run(N: int = 1000, T: int = 156, seed: int = 0, generator=None, workers: int = 1):
    """Semiconductor chain under a global constant forecast, OUT policy."""
    return run_montecarlo(builtin_chain("semiconductor_4tier"), generator or AR1Demand(),
                          GlobalConstantForecaster(), OrderUpTo(), T=T, N=N, seed=seed,
                          workers=workers)


def filtering_experiment(N: int = 1000, T: int = 156, seed: int = 0, workers: int = 1):
    res = filtering_run(N, T, seed, workers=workers)
    return res, filtering_report(res)


def concentration_experiment(N: int = 5000, T: int = 156, seed: int = 0, workers: int = 1):
    res = filtering_run(N, T, seed, workers=workers)
    return res, cumulative_concentration_report(res)


def lead_time_scenarios(N: int = 1, T: int = 156, seed: int = 42, stat: str = "mean") -> dict:
    """Cumulative BWR of the semiconductor chain under each lead-time scenario.

    Uses the single-path protocol (per-path constant forecast) on shared demand.
    """
    base = builtin_chain("semiconductor_4tier")
    gen = AR1Demand()
    demand = gen.generate_batch(T, N, seed)
    out = {}
    for name, L in LEAD_TIME_SCENARIOS.items():
        res = run_montecarlo(base.with_lead_times(L), gen, PathConstantForecaster(), OrderUpTo(),
                             T=T, N=N, seed=seed, demand=demand)
        out[name] = metrics.cumulative_bwr(res).stat(stat)
    return out


def policy_tradeoff(N: int = 1000, T: int = 156, seed: int = 0) -> dict:
    """OUT, POUT(0.3), smoothing OUT(0.3) and constant order on shared demand, naive forecasts."""
    chain = builtin_chain("semiconductor_4tier")
    gen = AR1Demand()
    demand = gen.generate_batch(T, N, seed)
    policies = {"order_up_to": OrderUpTo(), "proportional_out": ProportionalOUT(0.3),
                "smoothing_out": SmoothingOUT(0.3), "constant_order": ConstantOrder()}
    return {name: run_montecarlo(chain, gen, NaiveForecaster(), pol, T=T, N=N, seed=seed, demand=demand)
            for name, pol in policies.items()}


def cross_chain(N: int = 500, T: int = 156, seed: int = 0) -> dict:
    gen = AR1Demand()
    demand = gen.generate_batch(T, N, seed)
    out = {}
    for name in ("semiconductor_4tier", "beer_game", "consumer_2tier"):
        res = run_montecarlo(builtin_chain(name), gen, NaiveForecaster(), OrderUpTo(), T=T, N=N,
                             seed=seed, demand=demand)
        out[name] = metrics.cumulative_bwr(res).mean
    return out


def replay_vs_ar1(N: int = 500, T: int = 156, seed: int = 0, noise_fraction: float = 0.05) -> dict:
    chain = builtin_chain("semiconductor_4tier")
    out = {}
    for name, gen in (("ar1", AR1Demand()),
                      ("regime_switching", ReplayDemand(load_regime_switching(), noise_fraction))):
        res = run_montecarlo(chain, gen, NaiveForecaster(), OrderUpTo(), T=T, N=N, seed=seed)
        out[name] = metrics.cumulative_bwr(res).mean
    return out
