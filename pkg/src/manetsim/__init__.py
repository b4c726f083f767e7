"""Discrete-event MANET simulator: AODV, black hole attackers, Watchdog detectors."""
from .errors import ConfigError, InvariantViolation
from .metrics import RunSummary, finalize
from .network import Network, simulate
from .scenario import Scenario, load_scenario, parse_scenario

__all__ = [
    "ConfigError", "InvariantViolation", "Network", "RunSummary", "Scenario",
    "finalize", "load_scenario", "parse_scenario", "simulate",
]
__version__ = "0.1.0"
