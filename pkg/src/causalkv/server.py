"""Partition state machine of the HLC/DSV store.

One :class:`Partition` is the server ``p[m][n]``: partition ``n`` of replica
``m``.  Handlers take the incoming message, the simulated time and the local
physical clock reading, mutate the partition and return the actions to
perform (messages to send, trace notes).  No handler ever waits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import hlc
from .core import (
    ContractViolation,
    Version,
    ds_with,
    max_ds,
    placement,
    sv_max,
    sv_max_ds,
    sv_min,
    visible_under,
    zero_vector,
)
from .hlc import Hlc
from .messages import (
    DsvInstall,
    DsvShare,
    GetReply,
    GetReq,
    Heartbeat,
    PutReply,
    PutReq,
    Replicate,
    Rotx,
    RotxReply,
    SliceReply,
    SliceReq,
)
from .simnet import Send, server_addr
from .storage import Store


class FifoBreach(RuntimeError):
    """A peer's replication stream went backwards."""


@dataclass
class PendingRotx:
    client: str
    waiting: set
    vset: dict = field(default_factory=dict)
    ds: dict = field(default_factory=dict)


class Partition:
    protocol = "hlc-dsv"

    def __init__(self, m: int, n: int, n_replicas: int, n_partitions: int,
                 delta: float = 10.0, gate_remote_reads: bool = True) -> None:
        self.m, self.n = m, n
        self.M, self.N = n_replicas, n_partitions
        self.addr = server_addr(m, n)
        self.delta = delta
        # Remote versions are only served by GET once their own timestamp is
        # stable; see README "Remote read stability".
        self.gate_remote_reads = gate_remote_reads
        self.vv: list[Hlc] = list(zero_vector(n_replicas))
        self.dsv: tuple[Hlc, ...] = zero_vector(n_replicas)
        self.store = Store()
        self.last_replicate_sent = float("-inf")
        self.pending_rotx: dict[str, PendingRotx] = {}
        self._rounds: dict[int, list[tuple[Hlc, ...]]] = {}
        self.max_c = 0
        self.max_lead = 0  # largest ut.l - pt over local assignments

    # -- helpers ---------------------------------------------------------
    def peers(self):
        return [server_addr(k, self.n) for k in range(self.M) if k != self.m]

    def _check_hosts(self, k: str) -> None:
        if placement(k, self.N) != self.n:
            raise ContractViolation(f"{self.addr} does not host key {k!r}")

    def _advance(self, t: Hlc, pt: int) -> None:
        self.vv[self.m] = t
        self.max_c = max(self.max_c, t.c)
        self.max_lead = max(self.max_lead, t.l - pt)

    def readable(self, d: Version) -> bool:
        if d.sr == self.m:
            return True
        if self.gate_remote_reads and d.ut > self.dsv[d.sr]:
            return False
        return visible_under(d, self.m, self.dsv)

    def read(self, k: str) -> Version | None:
        return self.store.read_where(k, self.readable)

    # -- dispatch --------------------------------------------------------
    def on_message(self, src: str, msg, now: float, pt: int) -> list:
        match msg:
            case GetReq():
                return self.handle_get(src, msg)
            case PutReq():
                return self.handle_put(src, msg, now, pt)
            case Replicate():
                return self.handle_replicate(src, msg)
            case Heartbeat():
                return self.handle_heartbeat(src, msg)
            case Rotx():
                return self.handle_rotx(src, msg)
            case SliceReq():
                return self.handle_slice(src, msg)
            case SliceReply():
                return self.handle_slice_reply(msg)
            case DsvShare():
                return self.handle_dsv_share(msg)
            case DsvInstall():
                self.dsv = sv_max(self.dsv, msg.dsv)
                return []
        raise ContractViolation(f"{self.addr} cannot handle {type(msg).__name__}")

    def on_timer(self, name: str, tick: int, now: float, pt: int) -> list:
        if name == "dsv":
            return self.timer_dsv_round(tick)
        if name == "heartbeat":
            return self.timer_heartbeat(now, pt)
        raise ContractViolation(f"unknown timer {name}")

    # -- client operations -----------------------------------------------
    def handle_get(self, src: str, req: GetReq) -> list:
        self._check_hosts(req.k)
        self.dsv = sv_max(self.dsv, req.dsv)
        d = self.read(req.k)
        if d is None:
            reply = GetReply(req.op, None, {}, self.dsv, None)
        else:
            reply = GetReply(req.op, d.v, ds_with(d.ds, d.sr, d.ut), self.dsv, d.ref)
        return [Send(src, reply)]

    def handle_put(self, src: str, req: PutReq, now: float, pt: int) -> list:
        self._check_hosts(req.k)
        self.dsv = sv_max_ds(self.dsv, req.ds)
        dt = max([*req.ds.values(), self.dsv[self.m]])
        self._advance(hlc.tick_put(self.vv[self.m], dt, pt), pt)
        d = Version(req.k, req.v, self.vv[self.m], self.m, dict(req.ds))
        self.store.insert(d)
        out: list = [Send(src, PutReply(req.op, d.ut, self.m))]
        out += [Send(p, Replicate(d)) for p in self.peers()]
        self.last_replicate_sent = now
        return out

    # -- replication -----------------------------------------------------
    def _peer_entry(self, src: str, t: Hlc) -> int:
        k = int(src[1:].split(".")[0])
        if t < self.vv[k]:
            raise FifoBreach(f"{self.addr}: {t} from {src} is older than {self.vv[k]}")
        return k

    def handle_replicate(self, src: str, msg: Replicate) -> list:
        k = self._peer_entry(src, msg.d.ut)
        self.store.insert(msg.d)
        self.vv[k] = msg.d.ut
        return []

    def handle_heartbeat(self, src: str, msg: Heartbeat) -> list:
        k = self._peer_entry(src, msg.hlc)
        self.vv[k] = msg.hlc
        return []

    def timer_heartbeat(self, now: float, pt: int) -> list:
        if now - self.last_replicate_sent < self.delta:
            return []
        self._advance(hlc.tick_local(self.vv[self.m], pt), pt)
        return [Send(p, Heartbeat(self.vv[self.m])) for p in self.peers()]

    # -- stable vector rounds ----------------------------------------------
    def timer_dsv_round(self, tick: int) -> list:
        return [Send(server_addr(self.m, 0), DsvShare(tick, tuple(self.vv)))]

    def handle_dsv_share(self, msg: DsvShare) -> list:
        if self.n != 0:
            raise ContractViolation(f"{self.addr} is not the round coordinator")
        got = self._rounds.setdefault(msg.round, [])
        got.append(msg.vv)
        if len(got) < self.N:
            return []
        del self._rounds[msg.round]
        dsv = sv_min(got)
        return [Send(server_addr(self.m, j), DsvInstall(msg.round, dsv)) for j in range(self.N)]

    # -- read-only transactions ----------------------------------------------
    def handle_rotx(self, src: str, req: Rotx) -> list:
        if not req.kset:
            raise ContractViolation("read-only transaction over no keys")
        if all(placement(k, self.N) != self.n for k in req.kset):
            raise ContractViolation(f"{self.addr} hosts none of {req.kset}")
        self.dsv = sv_max_ds(sv_max(self.dsv, req.dsv), req.ds)
        sv = self.dsv
        keys = sorted(set(req.kset))
        self.pending_rotx[req.op] = PendingRotx(src, set(keys), ds=dict(req.ds))
        return [Send(server_addr(self.m, placement(k, self.N)), SliceReq(req.op, k, sv)) for k in keys]

    def handle_slice(self, src: str, req: SliceReq) -> list:
        self._check_hosts(req.k)
        if req.sv[self.m] > self.dsv[self.m]:
            self.dsv = self.dsv[: self.m] + (req.sv[self.m],) + self.dsv[self.m + 1:]
        d = self.store.read_snapshot(req.k, req.sv)
        if d is None:
            return [Send(src, SliceReply(req.txn, req.k, None, {}, None))]
        return [Send(src, SliceReply(req.txn, req.k, d.v, ds_with(d.ds, d.sr, d.ut), d.ref))]

    def handle_slice_reply(self, rep: SliceReply) -> list:
        p = self.pending_rotx[rep.txn]
        p.waiting.discard(rep.k)
        p.vset[rep.k] = (rep.v, rep.ver)
        p.ds = max_ds(p.ds, rep.ds)
        if p.waiting:
            return []
        del self.pending_rotx[rep.txn]
        return [Send(p.client, RotxReply(rep.txn, p.vset, self.dsv, p.ds))]

    # -- inspection --------------------------------------------------------
    def visible_winners(self) -> dict:
        return {k: d.ref for k in self.store.chains if (d := self.read(k)) is not None}

    def state(self) -> dict:
        return {"vv": list(self.vv), "dsv": self.dsv}
