"""Solar-powered multi-UAV NOMA random-access network simulator and a
Lagrangian primal-dual PPO trainer for joint altitude / access control."""

from uavnoma.config import (
    EnergyConfig,
    NetworkConfig,
    RunConfig,
    TrainerConfig,
    ConfigError,
    load_config,
)

__all__ = [
    "ConfigError",
    "EnergyConfig",
    "NetworkConfig",
    "RunConfig",
    "TrainerConfig",
    "load_config",
]

__version__ = "0.1.0"
