"""Sticky client session for the HLC/DSV store.

A session turns each operation into a request for its home replica and folds
the reply back into its dependency set and stable vector.  The transport is
somebody else's job (normally :mod:`causalkv.simnet`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import ContractViolation, max_ds, placement, sv_max, zero_vector
from .hlc import Hlc
from .messages import GetReply, GetReq, PutReply, PutReq, Rotx, RotxReply


class StickinessViolation(ContractViolation):
    """A session tried to talk to a replica other than its home."""


@dataclass
class ClientSession:
    id: str
    home: int
    n_replicas: int
    n_partitions: int
    ds: dict = field(default_factory=dict)
    dsv: tuple = ()

    def __post_init__(self) -> None:
        if not self.dsv:
            self.dsv = zero_vector(self.n_replicas)

    def check_replica(self, m: int) -> None:
        if m != self.home:
            raise StickinessViolation(f"session {self.id} is bound to replica {self.home}, not {m}")

    def partition_of(self, k: str) -> int:
        return placement(k, self.n_partitions)

    # Each operation is a (request, target partition) pair followed by a
    # completion step on the reply.

    def get_request(self, op: str, k: str) -> tuple[int, GetReq]:
        return self.partition_of(k), GetReq(op, k, self.dsv)

    def get_complete(self, reply: GetReply):
        self.dsv = sv_max(self.dsv, reply.dsv)
        self.ds = max_ds(self.ds, reply.ds)
        return reply.v

    def put_request(self, op: str, k: str, v) -> tuple[int, PutReq]:
        return self.partition_of(k), PutReq(op, k, v, dict(self.ds))

    def put_complete(self, reply: PutReply) -> tuple[Hlc, int]:
        self.ds = max_ds(self.ds, {reply.sr: reply.ut})
        return reply.ut, reply.sr

    def rotx_request(self, op: str, keys) -> tuple[int, Rotx]:
        kset = tuple(sorted(set(keys)))
        if not kset:
            raise ContractViolation("read-only transaction over no keys")
        coordinator = min(self.partition_of(k) for k in kset)
        return coordinator, Rotx(op, kset, self.dsv, dict(self.ds))

    def rotx_complete(self, reply: RotxReply) -> dict:
        self.dsv = sv_max(self.dsv, reply.dsv)
        self.ds = max_ds(self.ds, reply.ds)
        return {k: v for k, (v, _) in reply.vset.items()}

    def snapshot(self) -> dict:
        return {"ds": dict(self.ds), "dsv": self.dsv}
