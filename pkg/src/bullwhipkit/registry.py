"""Name-based component catalog.

Five categories (demand, policy, cost, forecaster, metric) map lowercase names
to factories taking keyword parameters.  Descriptions, default parameters and
references ship in ``data/catalog.json`` and are checked against the built-in
factories when the default registry is built.

User extensions register through :func:`register` or the :func:`component`
decorator::

    @component("policy", "my_pout", defaults={"alpha": 0.5})
    class MyPOUT(ProportionalOUT):
        ...
"""

from __future__ import annotations

import json
import re
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from . import cost as _cost
from . import demand as _demand
from . import forecast as _forecast
from . import metrics as _metrics
from . import policy as _policy

CATEGORIES = ("demand", "policy", "cost", "forecaster", "metric")
CATALOG_PATH = Path(__file__).parent / "data" / "catalog.json"
_NAME_RE = re.compile(r"^[a-z0-9_]+$")


class RegistryError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DuplicateRegistrationError(RegistryError):
    pass


@dataclass(frozen=True)
class RegistryKey:
    category: str
    name: str

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise RegistryError(f"unknown category {self.category!r}; expected one of {CATEGORIES}")
        if not isinstance(self.name, str) or not _NAME_RE.match(self.name):
            raise RegistryError(f"component name must match [a-z0-9_]+, got {self.name!r}")


@dataclass
class ComponentEntry:
    key: RegistryKey
    factory: Callable[..., Any]
    description: str = ""
    defaults: dict = field(default_factory=dict)
    reference: str = ""
    hook: bool = False  # placeholder entry whose factory is expected to raise


class Registry:
    def __init__(self):
        self._entries: dict[RegistryKey, ComponentEntry] = {}
        self._lock = threading.Lock()
        self._active = 0

    def register(self, key: RegistryKey, entry: ComponentEntry) -> None:
        with self._lock:
            if self._active:
                raise RegistryError("cannot register components while a benchmark is running")
            if key in self._entries:
                raise DuplicateRegistrationError(f"{key.category}/{key.name} is already registered")
            self._entries[key] = entry

    def entry(self, category: str, name: str) -> ComponentEntry:
        if category not in CATEGORIES:
            raise RegistryError(f"unknown category {category!r}; expected one of {CATEGORIES}")
        try:
            return self._entries[RegistryKey(category, name)]
        except (KeyError, RegistryError):
            names = ", ".join(self.list_registered(category))
            raise RegistryError(f"unknown {category} {name!r}; registered: {names}") from None

    def get(self, category: str, name: str, params: dict | None = None):
        """Instantiate with the entry's defaults overlaid by ``params``."""
        e = self.entry(category, name)
        kwargs = dict(e.defaults)
        kwargs.update(params or {})
        try:
            return e.factory(**kwargs)
        except TypeError as exc:
            raise ValueError(f"invalid parameters for {category}/{name}: {exc}") from None

    def list_registered(self, category: str) -> list[str]:
        if category not in CATEGORIES:
            raise RegistryError(f"unknown category {category!r}; expected one of {CATEGORIES}")
        return sorted(k.name for k in self._entries if k.category == category)

    def __contains__(self, key) -> bool:
        return RegistryKey(*key) in self._entries if isinstance(key, tuple) else key in self._entries

    @contextmanager
    def in_use(self):
        """Block new registrations for the duration of a run."""
        with self._lock:
            self._active += 1
        try:
            yield self
        finally:
            with self._lock:
                self._active -= 1


def _replay_factory(path=None, noise_fraction=0.05):
    data = _demand.load_regime_switching() if path is None else _demand.read_replay_csv(path)
    return _demand.ReplayDemand(data, noise_fraction)


def _cost_factory(cls):
    def make(holding_cost=None, backorder_cost=None, **kw):
        return cls(holding_cost, backorder_cost, **kw)
    return make


BUILTIN_FACTORIES: dict[tuple[str, str], Callable[..., Any]] = {
    ("demand", "semiconductor_ar1"): _demand.AR1Demand,
    ("demand", "beer_game"): _demand.BeerGameDemand,
    ("demand", "arma"): _demand.ARMADemand,
    ("demand", "replay"): _replay_factory,
    ("demand", "iid_normal"): _demand.IIDNormalDemand,
    ("policy", "order_up_to"): _policy.OrderUpTo,
    ("policy", "proportional_out"): _policy.ProportionalOUT,
    ("policy", "smoothing_out"): _policy.SmoothingOUT,
    ("policy", "constant_order"): _policy.ConstantOrder,
    ("cost", "newsvendor"): _cost_factory(_cost.NewsvendorCost),
    ("cost", "perishable"): _cost_factory(_cost.PerishableCost),
    ("forecaster", "naive"): _forecast.NaiveForecaster,
    ("forecaster", "moving_average"): _forecast.MovingAverageForecaster,
    ("forecaster", "exponential_smoothing"): _forecast.ExpSmoothingForecaster,
    ("forecaster", "deepar"): _forecast.DeepARForecaster,
    ("forecaster", "global_constant"): _forecast.GlobalConstantForecaster,
    ("forecaster", "path_constant"): _forecast.PathConstantForecaster,
    ("metric", "bwr"): _metrics.BWRMetric,
    ("metric", "cum_bwr"): _metrics.CumulativeBWRMetric,
    ("metric", "nsamp"): _metrics.NSAmpMetric,
    ("metric", "fill_rate"): _metrics.FillRateMetric,
    ("metric", "tc"): _metrics.TotalCostMetric,
    ("metric", "chen_lower_bound"): _metrics.ChenLowerBoundMetric,
}


def load_catalog(path=CATALOG_PATH) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    if not isinstance(items, list):
        raise RegistryError(f"{path}: catalog must be a JSON array")
    for i, item in enumerate(items):
        missing = {"category", "name", "description", "defaults", "reference"} - set(item)
        if missing:
            raise RegistryError(f"{path}: entry {i} lacks {sorted(missing)}")
    return items


def build_default_registry(catalog_path=CATALOG_PATH) -> Registry:
    """Register every built-in factory with its catalog metadata.

    Fails if the catalog and the factory table disagree on names, or if any
    non-hook entry cannot be built from its defaults.
    """
    items = load_catalog(catalog_path)
    listed = {(it["category"], it["name"]) for it in items}
    if len(listed) != len(items):
        raise RegistryError("catalog lists a component twice")
    if listed != set(BUILTIN_FACTORIES):
        extra = sorted(listed - set(BUILTIN_FACTORIES))
        missing = sorted(set(BUILTIN_FACTORIES) - listed)
        raise RegistryError(f"catalog/factory mismatch: no factory for {extra}, no metadata for {missing}")
    reg = Registry()
    for it in items:
        key = RegistryKey(it["category"], it["name"])
        entry = ComponentEntry(key, BUILTIN_FACTORIES[(key.category, key.name)], it["description"],
                               dict(it["defaults"]), it["reference"], bool(it.get("hook", False)))
        if not entry.hook:
            entry.factory(**entry.defaults)
        reg.register(key, entry)
    return reg


REGISTRY = build_default_registry()


def register(key: RegistryKey, entry: ComponentEntry, registry: Registry | None = None) -> None:
    (registry or REGISTRY).register(key, entry)


def get(category: str, name: str, params: dict | None = None, registry: Registry | None = None):
    return (registry or REGISTRY).get(category, name, params)


def list_registered(category: str, registry: Registry | None = None) -> list[str]:
    return (registry or REGISTRY).list_registered(category)


def component(category: str, name: str, description: str = "", defaults: dict | None = None,
              reference: str = "", registry: Registry | None = None):
    """Decorator form of :func:`register`; returns the factory unchanged."""
    def deco(factory):
        key = RegistryKey(category, name)
        register(key, ComponentEntry(key, factory, description, dict(defaults or {}), reference),
                 registry)
        return factory
    return deco
