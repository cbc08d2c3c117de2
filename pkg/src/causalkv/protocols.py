"""Factories binding a store implementation to the simulator."""

from __future__ import annotations

from dataclasses import dataclass

from .client import ClientSession
from .core import ConfigError
from .gentlerain import GrClientSession, GrPartition
from .server import Partition


@dataclass(frozen=True)
class HlcDsv:
    gate_remote_reads: bool = True
    name: str = "hlc-dsv"

    def partition(self, m, n, config):
        return Partition(m, n, config.M, config.N, delta=config.delta,
                         gate_remote_reads=self.gate_remote_reads)

    def session(self, id, home, config):
        return ClientSession(id, home, config.M, config.N)


@dataclass(frozen=True)
class GentleRain:
    name: str = "gentlerain"

    def partition(self, m, n, config):
        return GrPartition(m, n, config.M, config.N, delta=config.delta)

    def session(self, id, home, config):
        return GrClientSession(id, home, config.M, config.N)


def by_name(name: str, **kw):
    if name == "hlc-dsv":
        return HlcDsv(**kw)
    if name == "hlc-dsv-literal":
        return HlcDsv(gate_remote_reads=False, name="hlc-dsv-literal")
    if name == "gentlerain":
        return GentleRain()
    raise ConfigError(f"unknown protocol {name!r}")
