"""Transient stability of power systems with grid-forming converters:
current limiters, fast voltage boosters and equal-area analysis."""

from .eac import EacCase, SmibParams, critical_clearing_angle, curve_maximum, pdelta
from .errors import ConfigError, ConvergenceError, GfmError, NetworkError, NumericalError
from .scenario import Scenario, parse_scenario
from .simulation import SimResult, cct_latency_sweep, detect_los, find_cct, simulate

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "EacCase",
    "GfmError",
    "NetworkError",
    "NumericalError",
    "Scenario",
    "SimResult",
    "SmibParams",
    "cct_latency_sweep",
    "critical_clearing_angle",
    "curve_maximum",
    "detect_los",
    "find_cct",
    "parse_scenario",
    "pdelta",
    "simulate",
]
