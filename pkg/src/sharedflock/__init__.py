"""Shared-control simulator for drone teams: a user-biased motion-primitive
planner, admittance-controlled migration point, and flocking distribution,
streamed over a WebSocket topic bridge."""

__version__ = "0.1.0"

from .core import AgentState, SimClock, TeamState, barycenter
from .engine import MetricsReport, SimWorld, compute_metrics
from .scenario import Scenario, load_scenario, load_scenario_file

__all__ = [
    "AgentState", "SimClock", "TeamState", "barycenter",
    "MetricsReport", "SimWorld", "compute_metrics",
    "Scenario", "load_scenario", "load_scenario_file",
    "__version__",
]
