"""Policy x forecaster benchmark runner, parameter sweeps, table export and timing harness."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import registry as _registry
from .config import ChainConfig, EchelonConfig, builtin_chain, load_chain
from .demand import DemandBatch
from .engine import run_montecarlo, simulate_batch, simulate_serial
from .forecast import generate_forecasts

STATS = ("mean", "median", "std", "cv")
FORMATS = ("csv", "latex", "markdown")
CSV_COLUMNS = ("policy", "forecaster", "echelon", "metric", "value")


class BenchmarkError(ValueError):
    pass


@dataclass(frozen=True)
class ComponentSpec:
    """A registry name, its parameter overrides and the label used in records."""

    name: str
    params: dict = field(default_factory=dict)
    label: str | None = None

    @property
    def tag(self) -> str:
        return self.label or self.name

    @classmethod
    def parse(cls, item) -> "ComponentSpec":
        if isinstance(item, str):
            return cls(item)
        if isinstance(item, ComponentSpec):
            return item
        if not isinstance(item, dict) or "name" not in item:
            raise BenchmarkError(f"component must be a name or a mapping with 'name', got {item!r}")
        unknown = set(item) - {"name", "params", "label"}
        if unknown:
            raise BenchmarkError(f"unknown component fields {sorted(unknown)}")
        return cls(str(item["name"]), dict(item.get("params") or {}), item.get("label"))

    def to_dict(self) -> dict:
        d = {"name": self.name, "params": dict(self.params)}
        if self.label:
            d["label"] = self.label
        return d


@dataclass(frozen=True)
class BenchmarkSpec:
    chain: ChainConfig
    demand: ComponentSpec
    policies: tuple
    forecasters: tuple
    metrics: tuple
    cost: ComponentSpec = ComponentSpec("newsvendor")
    T: int = 156
    N: int = 1000
    seed: int = 0
    burn_in: int = 0
    stat: str = "mean"
    ip_timing: str = "pre_demand"
    start: str = "steady_state"
    workers: int = 1

    def __post_init__(self):
        for what in ("policies", "forecasters", "metrics"):
            if not getattr(self, what):
                raise BenchmarkError(f"{what} must be nonempty")
        if self.N < 1 or self.T < 1:
            raise BenchmarkError("N and T must be >= 1")
        if not 0 <= self.burn_in < self.T - 1:
            raise BenchmarkError(f"burn_in must lie in [0, T-2], got {self.burn_in}")
        if self.stat not in STATS:
            raise BenchmarkError(f"stat must be one of {STATS}")
        for kind, items in (("policy", self.policies), ("forecaster", self.forecasters),
                            ("metric", self.metrics)):
            tags = [c.tag for c in items]
            if len(set(tags)) != len(tags):
                raise BenchmarkError(f"duplicate {kind} labels {tags}")

    @classmethod
    def from_dict(cls, data: dict) -> "BenchmarkSpec":
        data = dict(data)
        known = {"chain", "chain_file", "demand", "policies", "forecasters", "metrics", "cost", "T",
                 "N", "seed", "burn_in", "stat", "ip_timing", "start", "workers", "bh_ratio"}
        unknown = set(data) - known
        if unknown:
            raise BenchmarkError(f"unknown benchmark fields {sorted(unknown)}")
        if "chain_file" in data:
            chain = load_chain(data["chain_file"])
        else:
            c = data.get("chain", "semiconductor_4tier")
            chain = builtin_chain(c) if isinstance(c, str) else ChainConfig.from_dict(c)
        if data.get("bh_ratio") is not None:
            chain = chain.with_cost_ratio(float(data["bh_ratio"]))
        parse = ComponentSpec.parse
        return cls(
            chain=chain,
            demand=parse(data.get("demand", "semiconductor_ar1")),
            policies=tuple(parse(p) for p in data.get("policies", ["order_up_to"])),
            forecasters=tuple(parse(f) for f in data.get("forecasters", ["naive"])),
            metrics=tuple(parse(m) for m in data.get("metrics", ["bwr", "cum_bwr", "nsamp", "fill_rate", "tc"])),
            cost=parse(data.get("cost", "newsvendor")),
            T=int(data.get("T", 156)),
            N=int(data.get("N", 1000)),
            seed=int(data.get("seed", 0)),
            burn_in=int(data.get("burn_in", 0)),
            stat=str(data.get("stat", "mean")),
            ip_timing=str(data.get("ip_timing", "pre_demand")),
            start=str(data.get("start", "steady_state")),
            workers=int(data.get("workers", 1)),
        )

    def to_dict(self) -> dict:
        return {
            "chain": self.chain.to_dict(),
            "demand": self.demand.to_dict(),
            "policies": [p.to_dict() for p in self.policies],
            "forecasters": [f.to_dict() for f in self.forecasters],
            "metrics": [m.to_dict() for m in self.metrics],
            "cost": self.cost.to_dict(),
            "T": self.T, "N": self.N, "seed": self.seed, "burn_in": self.burn_in,
            "stat": self.stat, "ip_timing": self.ip_timing, "start": self.start,
            "workers": self.workers,
        }


def load_spec(path) -> BenchmarkSpec:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise BenchmarkError(f"{path}: benchmark spec must be a mapping")
    return BenchmarkSpec.from_dict(data)


@dataclass(frozen=True)
class BenchmarkRecord:
    policy: str
    forecaster: str
    echelon: int
    metric: str
    value: float
    error: str | None = None

    def sort_key(self):
        return (self.policy, self.forecaster, self.echelon, self.metric)


class BenchmarkResult(list):
    """Records in canonical order plus run diagnostics."""

    def __init__(self, records, demand_hash: str = "", errors=None):
        super().__init__(sorted(records, key=BenchmarkRecord.sort_key))
        self.demand_hash = demand_hash
        self.errors = dict(errors or {})

    def value(self, policy, forecaster, echelon, metric) -> float:
        for r in self:
            if (r.policy, r.forecaster, r.echelon, r.metric) == (policy, forecaster, echelon, metric):
                return r.value
        raise KeyError((policy, forecaster, echelon, metric))


def demand_hash(batch: DemandBatch) -> str:
    v = np.ascontiguousarray(batch.values, dtype=np.float64)
    return hashlib.sha256(v.tobytes() + str(v.shape).encode()).hexdigest()


def _resolve(spec: BenchmarkSpec, reg):
    try:
        gen = reg.get("demand", spec.demand.name, spec.demand.params)
        cost = reg.get("cost", spec.cost.name, spec.cost.params)
        for c in spec.policies:
            reg.entry("policy", c.name)
        for c in spec.forecasters:
            reg.entry("forecaster", c.name)
        metrics = [reg.get("metric", m.name, m.params) for m in spec.metrics]
    except _registry.RegistryError as exc:
        raise BenchmarkError(str(exc)) from None
    return gen, cost, metrics


def run_benchmark(spec: BenchmarkSpec, demand: DemandBatch | None = None,
                  registry: _registry.Registry | None = None) -> BenchmarkResult:
    """Evaluate every metric at every echelon for every (policy, forecaster) pair.

    One demand batch is generated from ``spec.seed`` (or passed in) and shared by
    all pairs; its hash is checked before each simulation.  A pair that fails
    produces NaN records carrying the error text instead of aborting the run.
    """
    reg = registry or _registry.REGISTRY
    with reg.in_use():
        gen, cost, metrics = _resolve(spec, reg)
        if demand is None:
            demand = gen.generate_batch(spec.T, spec.N, spec.seed)
        if demand.values.shape != (spec.N, spec.T):
            raise BenchmarkError(f"demand batch shape {demand.values.shape} != (N, T) = {(spec.N, spec.T)}")
        digest = demand_hash(demand)
        K = spec.chain.K
        pairs = [(p, f) for p in spec.policies for f in spec.forecasters]

        def evaluate(pf):
            p, f = pf
            try:
                policy = reg.get("policy", p.name, p.params)
                fc = reg.get("forecaster", f.name, f.params)
                if demand_hash(demand) != digest:
                    raise BenchmarkError("shared demand batch was modified")
                res = run_montecarlo(spec.chain, gen, fc, policy, cost, T=spec.T, N=spec.N,
                                     seed=spec.seed, burn_in=spec.burn_in, ip_timing=spec.ip_timing,
                                     start=spec.start, demand=demand)
                out = []
                for m, mspec in zip(metrics, spec.metrics):
                    for k in range(1, K + 1):
                        val = m.compute(res, k).stat(spec.stat)
                        out.append(BenchmarkRecord(p.tag, f.tag, k, mspec.tag, float(val)))
                return out, None
            except Exception as exc:  # isolate the failing pair
                msg = f"{p.tag}/{f.tag}: {type(exc).__name__}: {exc}"
                warnings.warn(msg, RuntimeWarning, stacklevel=2)
                return [BenchmarkRecord(p.tag, f.tag, k, m.tag, math.nan, msg)
                        for m in spec.metrics for k in range(1, K + 1)], msg

        if spec.workers > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=spec.workers) as ex:
                outcomes = list(ex.map(evaluate, pairs))
        else:
            outcomes = [evaluate(pf) for pf in pairs]
    records, errors = [], {}
    for (p, f), (recs, err) in zip(pairs, outcomes):
        records.extend(recs)
        if err:
            errors[(p.tag, f.tag)] = err
    return BenchmarkResult(records, digest, errors)


def _label(name, param, value):
    return f"{name}[{param}={value:g}]" if isinstance(value, (int, float)) else f"{name}[{param}={value}]"


def sweep_parameter(spec: BenchmarkSpec, component, param_name: str, values,
                    registry: _registry.Registry | None = None) -> dict:
    """One benchmark per value of ``param_name`` on ``component`` = (category, name).

    ``("cost", <name>)`` with ``param_name="bh_ratio"`` rescales the chain's
    costs to h = 1/(1+r), b = r/(1+r).  Demand is generated once and shared
    unless the swept component is the demand generator itself.
    """
    category, name = component
    if category not in ("policy", "forecaster", "cost", "demand", "metric"):
        raise BenchmarkError(f"cannot sweep category {category!r}")
    values = list(values)
    if not values:
        raise BenchmarkError("sweep needs at least one value")
    reg = registry or _registry.REGISTRY
    shared = None
    if category != "demand":
        gen = reg.get("demand", spec.demand.name, spec.demand.params)
        shared = gen.generate_batch(spec.T, spec.N, spec.seed)
    out = {}
    for v in values:
        s = _with_param(spec, category, name, param_name, v)
        out[v] = run_benchmark(s, demand=shared, registry=reg)
    return out


def _with_param(spec, category, name, param, value):
    def bump(c):
        if c.name != name:
            return c
        return ComponentSpec(c.name, {**c.params, param: value}, c.label)

    if category == "cost" and param == "bh_ratio":
        if spec.cost.name != name:
            raise BenchmarkError(f"spec cost is {spec.cost.name!r}, not {name!r}")
        return replace(spec, chain=spec.chain.with_cost_ratio(float(value)))
    if category == "policy":
        if not any(c.name == name for c in spec.policies):
            raise BenchmarkError(f"policy {name!r} not in spec")
        return replace(spec, policies=tuple(bump(c) for c in spec.policies))
    if category == "forecaster":
        if not any(c.name == name for c in spec.forecasters):
            raise BenchmarkError(f"forecaster {name!r} not in spec")
        return replace(spec, forecasters=tuple(bump(c) for c in spec.forecasters))
    if category == "metric":
        return replace(spec, metrics=tuple(bump(c) for c in spec.metrics))
    if category == "cost":
        if spec.cost.name != name:
            raise BenchmarkError(f"spec cost is {spec.cost.name!r}, not {name!r}")
        return replace(spec, cost=bump(spec.cost))
    if spec.demand.name != name:
        raise BenchmarkError(f"spec demand is {spec.demand.name!r}, not {name!r}")
    return replace(spec, demand=bump(spec.demand))


# --- export -------------------------------------------------------------------------


def format_value(v: float, digits: int = 4) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.{digits}g}"


def _tex(s) -> str:
    return str(s).replace("\\", r"\textbackslash{}").replace("_", r"\_").replace("&", r"\&") \
        .replace("%", r"\%").replace("#", r"\#")


def render_table(records, fmt: str = "csv", digits: int = 4) -> str:
    records = list(records)
    if not records:
        raise BenchmarkError("no records to export")
    if fmt not in FORMATS:
        raise BenchmarkError(f"format must be one of {FORMATS}, got {fmt!r}")
    rows = [(r.policy, r.forecaster, str(r.echelon), r.metric, format_value(r.value, digits))
            for r in records]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(CSV_COLUMNS) + " |", "|" + "---|" * len(CSV_COLUMNS)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    lines = [r"\begin{tabular}{llrlr}", r"\toprule",
             "Policy & Forecaster & Echelon & Metric & Value \\\\", r"\midrule"]
    lines += [" & ".join(_tex(c) for c in r) + " \\\\" for r in rows]
    lines += [r"\bottomrule", r"\end{tabular}"]
    return "\n".join(lines) + "\n"


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_table(records, fmt: str = "csv", path=None, digits: int = 4) -> str:
    text = render_table(records, fmt, digits)
    if path is not None:
        write_atomic(path, text)
    return text


def parse_csv(text: str) -> list[BenchmarkRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise BenchmarkError(f"expected columns {CSV_COLUMNS}, got {reader.fieldnames}")
    return [BenchmarkRecord(r["policy"], r["forecaster"], int(r["echelon"]), r["metric"],
                            float(r["value"])) for r in reader]


# --- scaling harness ----------------------------------------------------------------

SCALING_COLUMNS = ("axis", "value", "serial_s", "batch_s", "speedup", "cells")


def scaling_chain(K: int) -> ChainConfig:
    """K echelons cycling through the semiconductor lead times and costs."""
    base = builtin_chain("semiconductor_4tier").echelons
    return ChainConfig(f"scaling_{K}", tuple(
        EchelonConfig(f"tier{k + 1}", base[k % 4].lead_time, base[k % 4].holding_cost,
                      base[k % 4].backorder_cost) for k in range(K)))


def time_point(N: int, T: int, K: int, serial: bool = True, seed: int = 0, repeats: int = 1) -> dict:
    reg = _registry.REGISTRY
    gen = reg.get("demand", "semiconductor_ar1")
    chain = scaling_chain(K)
    demand = gen.generate_batch(T, N, seed)
    fc = generate_forecasts(reg.get("forecaster", "naive"), demand, prior=gen.prior)
    policy = reg.get("policy", "order_up_to")
    cost = reg.get("cost", "newsvendor")

    def best(fn):
        times = []
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        return min(times)

    batch_s = best(lambda: simulate_batch(chain, demand, fc, policy, cost, prior=gen.prior))
    serial_s = math.nan
    if serial:
        def run_serial():
            for i in range(N):
                simulate_serial(chain, demand.values[i], fc.means[i], fc.stds[i], policy, cost,
                                prior=gen.prior, path_index=i)
        serial_s = best(run_serial)
    cells = N * K * T
    return {"N": N, "T": T, "K": K, "serial_s": serial_s, "batch_s": batch_s,
            "speedup": serial_s / batch_s if serial else math.nan, "cells": cells,
            "est_bytes": 8 * cells * 3 + 8 * N * T * 3}


def run_scaling_harness(axes: dict, base=(1000, 156, 4), serial: bool = True,
                        repeats: int = 1, seed: int = 0) -> list[dict]:
    """Vary one of N, T, K at a time around ``base``; other axes stay at their base value."""
    if not axes or not any(axes.values()):
        raise BenchmarkError("scaling harness needs at least one axis value")
    rows = []
    for axis in ("N", "T", "K"):
        for v in axes.get(axis) or ():
            n, t, k = base
            point = {"N": n, "T": t, "K": k}
            point[axis] = int(v)
            r = time_point(point["N"], point["T"], point["K"], serial, seed, repeats)
            r.update({"axis": axis, "value": int(v)})
            rows.append(r)
    return rows


def scaling_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCALING_COLUMNS)
    for r in rows:
        w.writerow([r["axis"], r["value"], f"{r['serial_s']:.6g}", f"{r['batch_s']:.6g}",
                    f"{r['speedup']:.4g}", r["cells"]])
    return buf.getvalue()
