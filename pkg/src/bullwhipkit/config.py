"""Chain and echelon configuration, plus the predefined chains."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EchelonConfig:
    role: str
    lead_time: int
    holding_cost: float
    backorder_cost: float

    def __post_init__(self):
        if int(self.lead_time) != self.lead_time or self.lead_time < 1:
            raise ConfigError(f"lead_time must be an integer >= 1, got {self.lead_time!r}")
        if self.holding_cost < 0 or self.backorder_cost < 0:
            raise ConfigError("holding_cost and backorder_cost must be nonnegative")
        if self.holding_cost + self.backorder_cost <= 0:
            raise ConfigError("holding_cost + backorder_cost must be positive")
        frac = self.backorder_cost / (self.backorder_cost + self.holding_cost)
        if not 0.0 < frac < 1.0:
            raise ConfigError(
                f"critical fractile {frac} outside (0, 1); both costs must be positive"
            )
        object.__setattr__(self, "lead_time", int(self.lead_time))
        object.__setattr__(self, "holding_cost", float(self.holding_cost))
        object.__setattr__(self, "backorder_cost", float(self.backorder_cost))

    @property
    def critical_fractile(self) -> float:
        return critical_fractile(self)


def critical_fractile(e: EchelonConfig) -> float:
    """Newsvendor service level b / (b + h)."""
    return e.backorder_cost / (e.backorder_cost + e.holding_cost)


@dataclass(frozen=True)
class ChainConfig:
    """A serial chain; ``echelons[0]`` is the tier facing the end customer."""

    name: str
    echelons: tuple[EchelonConfig, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "echelons", tuple(self.echelons))
        if len(self.echelons) < 1:
            raise ConfigError("a chain needs at least one echelon")

    @property
    def K(self) -> int:
        return len(self.echelons)

    @property
    def lead_times(self) -> list[int]:
        return [e.lead_time for e in self.echelons]

    @property
    def fractiles(self) -> list[float]:
        return [critical_fractile(e) for e in self.echelons]

    def with_lead_times(self, lead_times, name: str | None = None) -> "ChainConfig":
        if len(lead_times) != self.K:
            raise ConfigError(f"expected {self.K} lead times, got {len(lead_times)}")
        echelons = [
            EchelonConfig(e.role, int(L), e.holding_cost, e.backorder_cost)
            for e, L in zip(self.echelons, lead_times)
        ]
        return ChainConfig(name or self.name, tuple(echelons))

    def with_cost_ratio(self, ratio: float) -> "ChainConfig":
        """Normalized costs h + b = 1 with b/h = ratio at every echelon."""
        if ratio <= 0:
            raise ConfigError("b/h ratio must be positive")
        h = 1.0 / (1.0 + ratio)
        b = ratio / (1.0 + ratio)
        echelons = [EchelonConfig(e.role, e.lead_time, h, b) for e in self.echelons]
        return ChainConfig(self.name, tuple(echelons))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "echelon": [
                {
                    "role": e.role,
                    "lead_time": e.lead_time,
                    "holding_cost": e.holding_cost,
                    "backorder_cost": e.backorder_cost,
                }
                for e in self.echelons
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChainConfig":
        try:
            blocks = data["echelon"]
            echelons = [
                EchelonConfig(
                    role=str(b.get("role", f"E{i + 1}")),
                    lead_time=b["lead_time"],
                    holding_cost=b["holding_cost"],
                    backorder_cost=b["backorder_cost"],
                )
                for i, b in enumerate(blocks)
            ]
            return cls(str(data["name"]), tuple(echelons))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed chain config: missing or bad field {exc}") from exc


def dump_chain(config: ChainConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def parse_chain(text: str) -> ChainConfig:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError("chain config must be a mapping with 'name' and 'echelon'")
    return ChainConfig.from_dict(data)


def load_chain(path) -> ChainConfig:
    return parse_chain(Path(path).read_text())


def _chain(name, rows):
    return ChainConfig(name, tuple(EchelonConfig(*r) for r in rows))


# Beer Game and consumer chain costs are toolkit defaults; only lead times are pinned.
BUILTIN_CHAINS = {
    "semiconductor_4tier": _chain(
        "semiconductor_4tier",
        [
            ("Distributor / OEM", 2, 0.15, 0.60),
            ("Assembly & Test (OSAT)", 4, 0.12, 0.50),
            ("Foundry / Fab", 12, 0.08, 0.40),
            ("Wafer / Material", 8, 0.05, 0.30),
        ],
    ),
    "beer_game": _chain(
        "beer_game",
        [
            ("Retailer", 2, 0.50, 1.00),
            ("Wholesaler", 2, 0.50, 1.00),
            ("Distributor", 2, 0.50, 1.00),
            ("Factory", 2, 0.50, 1.00),
        ],
    ),
    "consumer_2tier": _chain(
        "consumer_2tier",
        [
            ("Retailer", 1, 0.20, 0.80),
            ("Manufacturer", 2, 0.10, 0.40),
        ],
    ),
}


def builtin_chain(name: str) -> ChainConfig:
    try:
        return BUILTIN_CHAINS[name]
    except KeyError:
        valid = ", ".join(sorted(BUILTIN_CHAINS))
        raise ConfigError(f"unknown chain {name!r}; valid names: {valid}") from None
