"""Causally consistent partitioned key-value store with hybrid logical clocks,
a GentleRain baseline, a deterministic network simulator and a trace checker."""

from .hlc import Hlc
from .protocols import GentleRain, HlcDsv
from .simnet import ClientProgram, Get, Put, Rotx, SimConfig, Simulation, Sleep

__all__ = ["Hlc", "HlcDsv", "GentleRain", "SimConfig", "Simulation", "ClientProgram",
           "Get", "Put", "Rotx", "Sleep"]
__version__ = "0.1.0"
