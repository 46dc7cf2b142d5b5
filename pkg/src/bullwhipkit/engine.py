"""Serial reference engine and batched Monte Carlo engine.

Sequence of events in period t, for every echelon k:

1. forecast: echelon 1 uses the supplied (mean, std); echelons k > 1 use the
   statistics of the last 8 orders received through t-1;
2. inventory position IP = on-hand + pipeline, taken before this period's
   demand (``ip_timing="pre_demand"``) or after it (``"post_demand"``);
3. order O_k(t) from the policy, appended to the pipeline;
4. receipt R_k(t) = the order placed L_k periods earlier;
5. I_k(t) = I_k(t-1) + R_k(t) - D_k(t), where D_1 is customer demand and
   D_k = O_{k-1}(t) for k > 1;
6. cost C_k(t) on the end-of-period net inventory.

The chain starts in steady state for the prior (mean, std): every pipeline slot
holds the prior mean and on-hand stock is set so that a period whose demand
equals the prior mean reproduces the same state.
"""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ChainConfig
from .cost import CostFunction, NewsvendorCost
from .demand import DemandBatch, DemandGenerator
from .forecast import (
    SIGMA_FLOOR,
    UPSTREAM_WINDOW,
    ForecastBatch,
    Forecaster,
    generate_forecasts,
    rolling_upstream_estimate,
)
from .policy import OrderingPolicy, OrderUpTo

IP_TIMINGS = ("pre_demand", "post_demand")


class SimulationError(RuntimeError):
    pass


def _check_timing(ip_timing):
    # "post_receipt" is accepted as an alias: receipts never change IP, demand does
    if ip_timing == "post_receipt":
        return "post_demand"
    if ip_timing not in IP_TIMINGS:
        raise SimulationError(f"ip_timing must be one of {IP_TIMINGS}, got {ip_timing!r}")
    return ip_timing


STARTS = ("steady_state", "order_up_to")


def _check_start(start):
    if start not in STARTS:
        raise SimulationError(f"start must be one of {STARTS}, got {start!r}")
    return start


@dataclass
class EchelonState:
    on_hand: float
    pipeline: deque
    previous_order: float
    order_history: deque = field(default_factory=lambda: deque(maxlen=UPSTREAM_WINDOW))

    @property
    def inventory_position(self) -> float:
        return self.on_hand + sum(self.pipeline)


def initialize_state(config: ChainConfig, prior_mean: float, prior_std: float,
                     ip_timing: str = "pre_demand", start: str = "steady_state") -> list[EchelonState]:
    """Steady-state start for every echelon.

    Pipelines hold ``prior_mean`` in each of the L_k slots.  With post-demand
    timing IP equals the initial OUT level S_k; with pre-demand timing one
    period of demand has already been served, so IP = S_k - prior_mean.
    """
    if prior_mean < 0:
        raise SimulationError("prior_mean must be nonnegative")
    ip_timing = _check_timing(ip_timing)
    _check_start(start)
    states = []
    for e in config.echelons:
        S = OrderUpTo(e.lead_time, e.critical_fractile).order_up_to_level(prior_mean, max(prior_std, SIGMA_FLOOR))
        on_hand = S - e.lead_time * prior_mean
        if ip_timing == "pre_demand" and start == "steady_state":
            on_hand -= prior_mean
        states.append(EchelonState(
            on_hand=float(on_hand),
            pipeline=deque([float(prior_mean)] * e.lead_time),
            previous_order=float(prior_mean),
        ))
    return states


@dataclass
class SimulationResult:
    orders: np.ndarray     # (N, K, T)
    inventory: np.ndarray  # (N, K, T)
    costs: np.ndarray      # (N, K, T)
    demand: np.ndarray     # (N, T) customer demand
    config: ChainConfig
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.orders.shape[0]

    @property
    def K(self) -> int:
        return self.orders.shape[1]

    @property
    def T(self) -> int:
        return self.orders.shape[2]

    @property
    def echelon_demand(self) -> np.ndarray:
        """(N, K, T) demand seen by each echelon."""
        return np.concatenate([self.demand[:, None, :], self.orders[:, :-1, :]], axis=1)

    def to_csv(self, fh=None) -> str | None:
        """Long-format trajectory table with 1-based path, echelon and period."""
        out = fh if fh is not None else io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["path", "echelon", "period", "demand", "order", "inventory", "cost"])
        dem = self.echelon_demand
        for i in range(self.N):
            for k in range(self.K):
                for t in range(self.T):
                    w.writerow([i + 1, k + 1, t + 1, repr(float(dem[i, k, t])),
                                repr(float(self.orders[i, k, t])),
                                repr(float(self.inventory[i, k, t])),
                                repr(float(self.costs[i, k, t]))])
        return out.getvalue() if fh is None else None


def _as_cost(cost) -> CostFunction:
    return NewsvendorCost() if cost is None else cost


def _as_policy(policy) -> OrderingPolicy:
    return OrderUpTo() if policy is None else policy


def _check_finite(value, what, path, k, t):
    if not math.isfinite(value):
        raise SimulationError(
            f"non-finite {what} at path {path + 1}, echelon {k + 1}, period {t + 1}"
        )


def simulate_serial(config: ChainConfig, demand, fc_means, fc_stds,
                    policy: OrderingPolicy | None = None, cost: CostFunction | None = None,
                    prior=None, ip_timing: str = "pre_demand", start: str = "steady_state",
                    path_index: int = 0) -> SimulationResult:
    """Reference engine: one path, plain Python loops over periods and echelons."""
    ip_timing = _check_timing(ip_timing)
    demand = np.asarray(demand, dtype=float).ravel()
    fc_means = np.asarray(fc_means, dtype=float).ravel()
    fc_stds = np.asarray(fc_stds, dtype=float).ravel()
    T = demand.size
    if fc_means.size != T or fc_stds.size != T:
        raise SimulationError(
            f"shape mismatch: demand has {T} periods, forecasts {fc_means.size}/{fc_stds.size}"
        )
    K = config.K
    policy = _as_policy(policy)
    cost = _as_cost(cost)
    policies = [policy.bind(e.lead_time, e.critical_fractile) for e in config.echelons]
    costs_fn = [cost.for_echelon(e) for e in config.echelons]
    mu0, sd0 = (float(fc_means[0]), float(fc_stds[0])) if prior is None else map(float, prior)
    states = initialize_state(config, mu0, sd0, ip_timing, start)

    orders = np.zeros((1, K, T))
    inventory = np.zeros((1, K, T))
    costs = np.zeros((1, K, T))
    for t in range(T):
        incoming = float(demand[t])
        _check_finite(incoming, "demand", path_index, 0, t)
        for k in range(K):
            st = states[k]
            if k == 0:
                fm, fs = float(fc_means[t]), max(float(fc_stds[t]), SIGMA_FLOOR)
            else:
                est = rolling_upstream_estimate(st.order_history, UPSTREAM_WINDOW, (mu0, sd0))
                fm, fs = est.mean, est.std
            ip = st.on_hand + sum(st.pipeline)
            if ip_timing == "post_demand":
                ip -= incoming
            if policies[k].stateful:
                o = float(policies[k].compute_order(ip, fm, fs, st.previous_order))
            else:
                o = float(policies[k].compute_order(ip, fm, fs))
            _check_finite(o, "order", path_index, k, t)
            st.pipeline.append(o)
            received = st.pipeline.popleft()
            st.on_hand = st.on_hand + received - incoming
            st.previous_order = o
            st.order_history.append(incoming)
            orders[0, k, t] = o
            inventory[0, k, t] = st.on_hand
            costs[0, k, t] = float(costs_fn[k].compute(st.on_hand))
            _check_finite(st.on_hand, "inventory", path_index, k, t)
            incoming = o
    return SimulationResult(orders, inventory, costs, demand[None, :].copy(), config,
                            meta={"engine": "serial", "ip_timing": ip_timing})


def _upstream_forecasts(orders, t, K, mu0, sd0):
    """Rolling (mean, std) of orders received by echelons 2..K through t-1.

    ``orders`` is time-major, shape (T, N, K).
    """
    N = orders.shape[1]
    w = min(t, UPSTREAM_WINDOW)
    if w == 0:
        return np.broadcast_to(mu0[:, None], (N, K - 1)), np.broadcast_to(sd0[:, None], (N, K - 1))
    win = orders[t - w:t, :, : K - 1]
    if w == 1:
        return win[0], np.broadcast_to(sd0[:, None], (N, K - 1))
    mean = win.mean(axis=0)
    std = np.maximum(win.std(axis=0, ddof=1), SIGMA_FLOOR)
    return mean, std


def simulate_batch(config: ChainConfig, demand, fc: ForecastBatch,
                   policy: OrderingPolicy | None = None, cost: CostFunction | None = None,
                   prior=None, ip_timing: str = "pre_demand",
                   start: str = "steady_state") -> SimulationResult:
    """Run N paths in lockstep.  Period loop is sequential; paths and echelons are bulk."""
    ip_timing = _check_timing(ip_timing)
    D = demand.values if isinstance(demand, DemandBatch) else np.asarray(demand, dtype=float)
    if D.ndim == 1:
        D = D[None, :]
    N, T = D.shape
    if fc.means.shape != (N, T) or fc.stds.shape != (N, T):
        raise SimulationError(f"shape mismatch: demand {D.shape}, forecasts {fc.means.shape}")
    if not np.all(np.isfinite(D)):
        i, t = np.argwhere(~np.isfinite(D))[0]
        raise SimulationError(f"non-finite demand at path {i + 1}, period {t + 1}")
    K = config.K
    policy = _as_policy(policy)
    cost = _as_cost(cost)
    L = np.array(config.lead_times)
    frac = np.array(config.fractiles)
    bound = policy.bind(L, frac)
    costs_fn = [cost.for_echelon(e) for e in config.echelons]

    if prior is None:
        mu0, sd0 = fc.means[:, 0].astype(float), fc.stds[:, 0].astype(float)
    else:
        mu0 = np.broadcast_to(np.asarray(prior[0], dtype=float), (N,)).copy()
        sd0 = np.broadcast_to(np.asarray(prior[1], dtype=float), (N,)).copy()

    # steady-state initial state, see initialize_state
    S0 = bound.order_up_to_level(mu0[:, None], np.maximum(sd0, SIGMA_FLOOR)[:, None])
    on_hand = S0 - L * mu0[:, None]
    if ip_timing == "pre_demand" and _check_start(start) == "steady_state":
        on_hand = on_hand - mu0[:, None]
    Lmax = int(L.max())
    pipe = np.zeros((N, K, Lmax))
    for k in range(K):
        pipe[:, k, : L[k]] = mu0[:, None]
    pipe_sum = L * mu0[:, None]
    ptr = np.zeros(K, dtype=int)
    kk = np.arange(K)
    prev = np.repeat(mu0[:, None], K, axis=1)

    # time-major buffers keep per-period writes and window reads contiguous
    orders = np.empty((T, N, K))
    inventory = np.empty((T, N, K))
    costs = np.empty((T, N, K))
    fm = np.empty((N, K))
    fs = np.empty((N, K))

    if ip_timing == "post_demand":
        per_k = [policy.bind(e.lead_time, e.critical_fractile) for e in config.echelons]

    for t in range(T):
        fm[:, 0] = fc.means[:, t]
        fs[:, 0] = np.maximum(fc.stds[:, t], SIGMA_FLOOR)
        if K > 1:
            fm[:, 1:], fs[:, 1:] = _upstream_forecasts(orders, t, K, mu0, sd0)
        ip = on_hand + pipe_sum
        if ip_timing == "pre_demand":
            o = bound.compute_order(ip, fm, fs, prev) if bound.stateful else bound.compute_order(ip, fm, fs)
            o = np.broadcast_to(o, (N, K)).astype(float)
            incoming = np.concatenate([D[:, t:t + 1], o[:, :-1]], axis=1)
        else:
            o = np.empty((N, K))
            incoming = np.empty((N, K))
            inc = D[:, t]
            for k in range(K):
                pk = per_k[k]
                args = (ip[:, k] - inc, fm[:, k], fs[:, k])
                ok = pk.compute_order(*args, prev[:, k]) if pk.stateful else pk.compute_order(*args)
                o[:, k] = ok
                incoming[:, k] = inc
                inc = o[:, k]
        if not np.all(np.isfinite(o)):
            i, k = np.argwhere(~np.isfinite(o))[0]
            raise SimulationError(f"non-finite order at path {i + 1}, echelon {k + 1}, period {t + 1}")
        received = pipe[:, kk, ptr]
        pipe[:, kk, ptr] = o
        ptr = (ptr + 1) % L
        pipe_sum = pipe_sum + o - received
        on_hand = on_hand + received - incoming
        prev = o
        orders[t] = o
        inventory[t] = on_hand
        for k in range(K):
            costs[t, :, k] = costs_fn[k].compute(on_hand[:, k])
    orders, inventory, costs = (np.ascontiguousarray(a.transpose(1, 2, 0))
                                for a in (orders, inventory, costs))
    if not np.all(np.isfinite(inventory)):
        i, k, t = np.argwhere(~np.isfinite(inventory))[0]
        raise SimulationError(f"non-finite inventory at path {i + 1}, echelon {k + 1}, period {t + 1}")
    return SimulationResult(orders, inventory, costs, D.copy(), config,
                            seed=getattr(demand, "base_seed", None),
                            meta={"engine": "batch", "ip_timing": ip_timing})


def run_montecarlo(config: ChainConfig, generator: DemandGenerator, forecaster: Forecaster,
                   policy: OrderingPolicy | None = None, cost: CostFunction | None = None,
                   T: int = 156, N: int = 1000, seed: int = 0, burn_in: int = 0,
                   workers: int = 1, ip_timing: str = "pre_demand", start: str = "steady_state",
                   demand: DemandBatch | None = None) -> SimulationResult:
    """generate demand -> forecasts -> batched simulation, deterministic in ``seed``.

    ``workers > 1`` shards paths across threads; every path's arithmetic is
    elementwise, so the output is identical to a single-worker run.
    """
    if demand is None:
        demand = generator.generate_batch(T, N, seed)
    fc = generate_forecasts(forecaster, demand, prior=generator.prior)
    N = demand.N
    workers = max(1, int(workers))
    if workers == 1 or N < 2 * workers:
        result = simulate_batch(config, demand, fc, policy, cost, ip_timing=ip_timing, start=start)
    else:
        bounds = np.linspace(0, N, workers + 1).astype(int)

        def shard(a, b):
            return simulate_batch(config, demand.values[a:b],
                                  ForecastBatch(fc.means[a:b], fc.stds[a:b]),
                                  policy, cost, ip_timing=ip_timing, start=start)

        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda ab: shard(*ab), zip(bounds[:-1], bounds[1:])))
        result = SimulationResult(
            np.concatenate([p.orders for p in parts]),
            np.concatenate([p.inventory for p in parts]),
            np.concatenate([p.costs for p in parts]),
            demand.values.copy(), config, meta={"engine": "batch", "ip_timing": ip_timing},
        )
    result.seed = demand.base_seed
    result.meta.update({
        "burn_in": int(burn_in),
        "forecast_window": getattr(forecaster, "window", None),
        "upstream_window": UPSTREAM_WINDOW,
        "forecaster": type(forecaster).__name__,
        "policy": type(policy).__name__ if policy is not None else "OrderUpTo",
    })
    return result
