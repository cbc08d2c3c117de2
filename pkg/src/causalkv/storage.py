"""Per-partition multi-version store."""

from __future__ import annotations

from bisect import bisect_left
from typing import Iterator

from .core import Version, version_to_json, visible_in_snapshot, visible_under
from .hlc import Hlc


class VersionChain:
    """Versions of one key, kept in ascending ``(ut, sr)`` order internally."""

    def __init__(self) -> None:
        self._orders: list[tuple[Hlc, int]] = []
        self._versions: list[Version] = []

    def insert(self, d: Version) -> None:
        i = bisect_left(self._orders, d.order)
        if i < len(self._orders) and self._orders[i] == d.order:
            self._versions[i] = d
            return
        self._orders.insert(i, d.order)
        self._versions.insert(i, d)

    def __iter__(self) -> Iterator[Version]:
        """Newest first."""
        return reversed(self._versions)

    def __len__(self) -> int:
        return len(self._versions)

    @property
    def head(self) -> Version | None:
        return self._versions[-1] if self._versions else None


class Store:
    def __init__(self) -> None:
        self.chains: dict[str, VersionChain] = {}

    def insert(self, d: Version) -> None:
        chain = self.chains.get(d.k)
        if chain is None:
            chain = self.chains[d.k] = VersionChain()
        chain.insert(d)

    def chain(self, k: str) -> VersionChain:
        return self.chains.get(k) or VersionChain()

    def latest(self, k: str) -> Version | None:
        return self.chain(k).head

    def read_visible(self, k: str, local: int, dsv: tuple[Hlc, ...]) -> Version | None:
        for d in self.chain(k):
            if visible_under(d, local, dsv):
                return d
        return None

    def read_snapshot(self, k: str, sv: tuple[Hlc, ...]) -> Version | None:
        for d in self.chain(k):
            if visible_in_snapshot(d, sv):
                return d
        return None

    def read_where(self, k: str, pred) -> Version | None:
        for d in self.chain(k):
            if pred(d):
                return d
        return None

    def dump(self) -> dict:
        """Canonical JSON-ready snapshot: key -> versions, newest first."""
        return {k: [version_to_json(d) for d in self.chains[k]] for k in sorted(self.chains)}
