"""Serial multi-echelon supply chain simulation and bullwhip benchmarking."""

from .config import ChainConfig, EchelonConfig, builtin_chain, load_chain
from .demand import AR1Demand, ARMADemand, BeerGameDemand, IIDNormalDemand, ReplayDemand
from .engine import SimulationResult, run_montecarlo, simulate_batch, simulate_serial
from .forecast import (
    ExpSmoothingForecaster,
    GlobalConstantForecaster,
    MovingAverageForecaster,
    NaiveForecaster,
    PathConstantForecaster,
    generate_forecasts,
)
from .policy import ConstantOrder, OrderUpTo, ProportionalOUT, SmoothingOUT, safety_factor

__version__ = "0.1.0"

__all__ = [
    "AR1Demand", "ARMADemand", "BeerGameDemand", "ChainConfig", "ConstantOrder", "EchelonConfig",
    "ExpSmoothingForecaster", "GlobalConstantForecaster", "IIDNormalDemand", "MovingAverageForecaster",
    "NaiveForecaster", "OrderUpTo", "PathConstantForecaster", "ProportionalOUT", "ReplayDemand",
    "SimulationResult", "SmoothingOUT", "builtin_chain", "generate_forecasts", "load_chain",
    "run_montecarlo", "safety_factor", "simulate_batch", "simulate_serial", "__version__",
]
