"""Discrete-event S-MAC simulator with per-class QoS adaptations."""

from .config import ConfigError, RunConfig, load_config
from .qos import Scheme, TrafficClass
from .sim import SimResult, Simulation, run_simulation

__all__ = ["ConfigError", "RunConfig", "load_config", "Scheme", "TrafficClass", "SimResult",
           "Simulation", "run_simulation"]
__version__ = "0.1.0"
