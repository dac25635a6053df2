"""Deterministic discrete-event simulator for multi-connection ad-hoc routing
experiments: distance-vector and source-routing baselines plus a QoS-aware
multi-connection maintenance variant, with bundled experiment presets."""

__version__ = "0.1.0"

from .connections import (AdmitOutcome, Connection, ConnectionManager,
                          ConnState, NodeBandwidthLedger, Priority,
                          select_drops)
from .engine import Engine, Event, RngStream, SchedulingError, draw_uniform
from .metrics import (MetricsLedger, overhead_per_request, pdr,
                      per_connection_throughput, throughput)
from .scenario import Scenario, SweepSpec, load_preset
from .sim import Simulation
from .world import World

__all__ = [
    "AdmitOutcome", "Connection", "ConnectionManager", "ConnState",
    "Engine", "Event", "MetricsLedger", "NodeBandwidthLedger", "Priority",
    "RngStream", "Scenario", "SchedulingError", "Simulation", "SweepSpec",
    "World", "draw_uniform", "load_preset", "overhead_per_request", "pdr",
    "per_connection_throughput", "select_drops", "throughput",
]
