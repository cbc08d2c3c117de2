"""Shared domain values: dependency sets, stable vectors, versions.

Dependency sets are plain ``dict[int, Hlc]`` (replica id -> timestamp) and
stable vectors are ``tuple[Hlc, ...]`` of length M.  Every function here
returns a new value and never mutates its inputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Mapping

from .hlc import ZERO, Hlc, decode, encode

DependencySet = dict  # dict[int, Hlc]
StableVector = tuple  # tuple[Hlc, ...]

# Sentinel source replica of the virtual initial version of every key.
INITIAL_SR = -1


class ConfigError(ValueError):
    """Inconsistent simulation or protocol configuration."""


class ContractViolation(RuntimeError):
    """A caller broke an operation's precondition."""


def placement(key: str, n_partitions: int) -> int:
    """Stable key -> partition mapping, identical at every replica."""
    digest = hashlib.blake2b(key.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % n_partitions


def keys_for_partitions(n_partitions: int, per_partition: int, prefix: str = "k") -> list[str]:
    """``per_partition`` keys on every partition, ordered round-robin by partition."""
    buckets: list[list[str]] = [[] for _ in range(n_partitions)]
    i = 0
    while min(len(b) for b in buckets) < per_partition:
        key = f"{prefix}{i}"
        b = buckets[placement(key, n_partitions)]
        if len(b) < per_partition:
            b.append(key)
        i += 1
    return [buckets[p][j] for j in range(per_partition) for p in range(n_partitions)]


# -- dependency sets -------------------------------------------------------

def max_ds(a: Mapping[int, Hlc], b: Mapping[int, Hlc]) -> dict[int, Hlc]:
    out = dict(a)
    for i, h in b.items():
        cur = out.get(i)
        if cur is None or h > cur:
            out[i] = h
    return out


def ds_with(ds: Mapping[int, Hlc], sr: int, ut: Hlc) -> dict[int, Hlc]:
    """``ds`` with the version ``<sr, ut>`` folded in."""
    return max_ds(ds, {sr: ut})


# -- stable vectors --------------------------------------------------------

def zero_vector(m: int) -> tuple[Hlc, ...]:
    if m < 1:
        raise ConfigError("a stable vector needs at least one replica")
    return (ZERO,) * m


def sv_max(a: tuple[Hlc, ...], b: tuple[Hlc, ...]) -> tuple[Hlc, ...]:
    if len(a) != len(b):
        raise ConfigError(f"vector length mismatch: {len(a)} != {len(b)}")
    return tuple(x if x >= y else y for x, y in zip(a, b))


def sv_min(vectors: list[tuple[Hlc, ...]]) -> tuple[Hlc, ...]:
    if not vectors:
        raise ConfigError("entry-wise minimum of no vectors")
    width = len(vectors[0])
    if any(len(v) != width for v in vectors):
        raise ConfigError("vector length mismatch")
    return tuple(min(col) for col in zip(*vectors))


def sv_max_ds(sv: tuple[Hlc, ...], ds: Mapping[int, Hlc]) -> tuple[Hlc, ...]:
    """Raise only the entries named in ``ds``."""
    out = list(sv)
    for i, h in ds.items():
        if not 0 <= i < len(out):
            raise ConfigError(f"dependency on replica {i} outside vector of length {len(out)}")
        if h > out[i]:
            out[i] = h
    return tuple(out)


def sv_leq(a: tuple[Hlc, ...], b: tuple[Hlc, ...]) -> bool:
    return all(x <= y for x, y in zip(a, b))


# -- versions ---------------------------------------------------------------

@dataclass(frozen=True)
class Version:
    k: str
    v: Any
    ut: Hlc
    sr: int
    ds: Mapping[int, Hlc] = field(default_factory=dict, hash=False, compare=False)

    @property
    def order(self) -> tuple[Hlc, int]:
        return (self.ut, self.sr)

    @property
    def ref(self) -> "VersionRef":
        return VersionRef(self.k, self.ut, self.sr)


@dataclass(frozen=True, order=True)
class VersionRef:
    """Identity of a version: the key plus its last-writer-wins rank."""

    k: str
    ut: Hlc
    sr: int

    def to_json(self) -> list:
        return [self.k, encode(self.ut), self.sr]

    @classmethod
    def from_json(cls, raw: list | None) -> "VersionRef | None":
        if raw is None:
            return None
        k, ut, sr = raw
        return cls(k, decode(ut), sr)


def lww_winner(a: Version, b: Version) -> Version:
    if a.k != b.k:
        raise ContractViolation(f"cannot resolve versions of different keys {a.k!r} and {b.k!r}")
    return a if a.order >= b.order else b


def visible_under(d: Version, local: int, dsv: tuple[Hlc, ...]) -> bool:
    """GET visibility: local versions always, remote ones once their dependencies are stable."""
    if d.sr == local:
        return True
    return all(h <= dsv[i] for i, h in d.ds.items())


def visible_in_snapshot(d: Version, sv: tuple[Hlc, ...]) -> bool:
    """Snapshot visibility: the version itself and all its dependencies lie inside ``sv``."""
    if d.ut > sv[d.sr]:
        return False
    return all(h <= sv[i] for i, h in d.ds.items())


# -- canonical JSON ----------------------------------------------------------

def ds_to_json(ds: Mapping[int, Hlc]) -> list[list[int]]:
    return [[i, encode(h)] for i, h in sorted(ds.items())]


def ds_from_json(raw: list) -> dict[int, Hlc]:
    return {int(i): decode(h) for i, h in raw}


def sv_to_json(sv: tuple[Hlc, ...]) -> list[int]:
    return [encode(h) for h in sv]


def sv_from_json(raw: list) -> tuple[Hlc, ...]:
    return tuple(decode(h) for h in raw)


def version_to_json(d: Version) -> dict:
    return {"k": d.k, "v": d.v, "ut": encode(d.ut), "sr": d.sr, "ds": ds_to_json(d.ds)}


def version_from_json(raw: dict) -> Version:
    return Version(raw["k"], raw["v"], decode(raw["ut"]), raw["sr"], ds_from_json(raw["ds"]))
