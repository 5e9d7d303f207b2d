"""Packet-level simulator for lossless datacenter fabrics: PFC, QCN,
TCP/DCTCP and mice/elephant queue isolation on a leaf-spine topology."""

from .config import ConfigError, ScenarioConfig, load_scenario, parse_scenario, serialize
from .engine import Simulator
from .metrics import MetricsReport
from .runner import RunResult, run, stock, stock_names

__version__ = "0.1.0"
