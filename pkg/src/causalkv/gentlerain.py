"""GentleRain baseline on the same substrate.

Timestamps are physical: a version gets the server's clock reading (in ms)
plus a per-millisecond sequence number starting at 1, carried in an ``Hlc``
pair purely so both stores share one ordering and one encoding.  A server
announces ``(pt, 0)`` as a lower bound for its future writes.

A PUT whose dependency time is not yet behind the server clock is parked
until it is; a read-only transaction whose dependency time is ahead of the
global stable time (GST) is parked until a GST round catches up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import ContractViolation, Version, placement, zero_vector
from .hlc import ZERO, Hlc
from .messages import (
    GrGetReply,
    GrGetReq,
    GrGstInstall,
    GrGstShare,
    GrHeartbeat,
    GrPutReply,
    GrPutReq,
    GrReplicate,
    GrRotx,
    GrRotxReply,
    GrSliceReply,
    GrSliceReq,
)
from .server import FifoBreach
from .simnet import Note, Send, Wakeup, server_addr
from .storage import Store


@dataclass
class ParkedPut:
    src: str
    req: GrPutReq
    since: float


@dataclass
class GrPendingRotx:
    client: str
    kset: tuple
    dt: Hlc
    since: float
    snapshot: Hlc | None = None
    waiting: set = field(default_factory=set)
    vset: dict = field(default_factory=dict)


class GrPartition:
    protocol = "gentlerain"

    def __init__(self, m: int, n: int, n_replicas: int, n_partitions: int,
                 delta: float = 10.0) -> None:
        self.m, self.n = m, n
        self.M, self.N = n_replicas, n_partitions
        self.addr = server_addr(m, n)
        self.delta = delta
        self.last: Hlc = ZERO
        self.vv: list[Hlc] = list(zero_vector(n_replicas))
        self.gst: Hlc = ZERO
        self.store = Store()
        self.last_replicate_sent = float("-inf")
        self.parked_puts: list[ParkedPut] = []
        self.pending_rotx: dict[str, GrPendingRotx] = {}
        self._rounds: dict[int, list[Hlc]] = {}
        self.max_c = 0
        self.max_lead = 0

    def peers(self):
        return [server_addr(k, self.n) for k in range(self.M) if k != self.m]

    def _check_hosts(self, k: str) -> None:
        if placement(k, self.N) != self.n:
            raise ContractViolation(f"{self.addr} does not host key {k!r}")

    def floor(self, pt: int) -> Hlc:
        """Lower bound on every timestamp this server will assign from now on."""
        return max(self.last, Hlc(pt, 0))

    def local_entry(self, pt: int) -> Hlc:
        self.vv[self.m] = self.floor(pt)
        return self.vv[self.m]

    def readable(self, d: Version) -> bool:
        return d.sr == self.m or d.ut <= self.gst

    def read(self, k: str) -> Version | None:
        return self.store.read_where(k, self.readable)

    # -- dispatch --------------------------------------------------------
    def on_message(self, src: str, msg, now: float, pt: int) -> list:
        match msg:
            case GrGetReq():
                return self.handle_get(src, msg)
            case GrPutReq():
                return self.handle_put(src, msg, now, pt)
            case GrReplicate():
                return self.handle_replicate(src, msg)
            case GrHeartbeat():
                k = self._peer_entry(src, msg.ts)
                self.vv[k] = msg.ts
                return []
            case GrRotx():
                return self.handle_rotx(src, msg, now)
            case GrSliceReq():
                return self.handle_slice(src, msg)
            case GrSliceReply():
                return self.handle_slice_reply(msg)
            case GrGstShare():
                return self.handle_gst_share(msg)
            case GrGstInstall():
                return self.install_gst(msg.gst, now)
        raise ContractViolation(f"{self.addr} cannot handle {type(msg).__name__}")

    def on_timer(self, name: str, tick: int, now: float, pt: int) -> list:
        if name == "dsv":
            return self.timer_gst_round(tick, pt)
        if name == "heartbeat":
            return self.timer_heartbeat(now, pt)
        raise ContractViolation(f"unknown timer {name}")

    def on_wakeup(self, token, now: float, pt: int) -> list:
        out: list = []
        still = []
        for p in self.parked_puts:
            if pt > p.req.dt.l:
                out += self._apply_put(p.src, p.req, now, pt)
            else:
                still.append(p)
        self.parked_puts = still
        return out

    # -- client operations -----------------------------------------------
    def handle_get(self, src: str, req: GrGetReq) -> list:
        self._check_hosts(req.k)
        self.gst = max(self.gst, req.gst)
        d = self.read(req.k)
        if d is None:
            return [Send(src, GrGetReply(req.op, None, ZERO, self.gst, None))]
        return [Send(src, GrGetReply(req.op, d.v, d.ut, self.gst, d.ref))]

    def handle_put(self, src: str, req: GrPutReq, now: float, pt: int) -> list:
        self._check_hosts(req.k)
        if pt > req.dt.l:
            return self._apply_put(src, req, now, pt)
        self.parked_puts.append(ParkedPut(src, req, now))
        return [
            Note("put-deferred", {"op": req.op, "server": self.addr, "dt": req.dt.l, "pt": pt}),
            Wakeup(req.dt.l + 1),
        ]

    def _apply_put(self, src: str, req: GrPutReq, now: float, pt: int) -> list:
        if pt > self.last.l:
            ut = Hlc(pt, 1)
        else:
            ut = Hlc(self.last.l, self.last.c + 1)
        self.last = ut
        self.vv[self.m] = ut
        self.max_c = max(self.max_c, ut.c)
        self.max_lead = max(self.max_lead, ut.l - pt)
        d = Version(req.k, req.v, ut, self.m, {})
        self.store.insert(d)
        out: list = []
        parked = [p for p in self.parked_puts if p.req is req]
        if parked:
            out.append(Note("put-released", {"op": req.op, "server": self.addr,
                                             "wait": now - parked[0].since}))
        out.append(Send(src, GrPutReply(req.op, ut, self.m)))
        out += [Send(p, GrReplicate(d)) for p in self.peers()]
        self.last_replicate_sent = now
        return out

    # -- replication -----------------------------------------------------
    def _peer_entry(self, src: str, t: Hlc) -> int:
        k = int(src[1:].split(".")[0])
        if t < self.vv[k]:
            raise FifoBreach(f"{self.addr}: {t} from {src} is older than {self.vv[k]}")
        return k

    def handle_replicate(self, src: str, msg: GrReplicate) -> list:
        k = self._peer_entry(src, msg.d.ut)
        self.store.insert(msg.d)
        self.vv[k] = msg.d.ut
        return []

    def timer_heartbeat(self, now: float, pt: int) -> list:
        if now - self.last_replicate_sent < self.delta:
            return []
        ts = self.local_entry(pt)
        return [Send(p, GrHeartbeat(ts)) for p in self.peers()]

    # -- global stable time --------------------------------------------------
    def timer_gst_round(self, tick: int, pt: int) -> list:
        self.local_entry(pt)
        return [Send(server_addr(self.m, 0), GrGstShare(tick, min(self.vv)))]

    def handle_gst_share(self, msg: GrGstShare) -> list:
        if self.n != 0:
            raise ContractViolation(f"{self.addr} is not the round coordinator")
        got = self._rounds.setdefault(msg.round, [])
        got.append(msg.ts)
        if len(got) < self.N:
            return []
        del self._rounds[msg.round]
        gst = min(got)
        return [Send(server_addr(self.m, j), GrGstInstall(msg.round, gst)) for j in range(self.N)]

    def install_gst(self, gst: Hlc, now: float) -> list:
        self.gst = max(self.gst, gst)
        out: list = []
        for op, p in list(self.pending_rotx.items()):
            if p.snapshot is None and p.dt <= self.gst:
                out.append(Note("rotx-released", {"op": op, "server": self.addr, "wait": now - p.since}))
                out += self._start_slices(op, p)
        return out

    # -- read-only transactions ----------------------------------------------
    def handle_rotx(self, src: str, req: GrRotx, now: float) -> list:
        if not req.kset:
            raise ContractViolation("read-only transaction over no keys")
        if all(placement(k, self.N) != self.n for k in req.kset):
            raise ContractViolation(f"{self.addr} hosts none of {req.kset}")
        self.gst = max(self.gst, req.gst)
        p = GrPendingRotx(src, tuple(sorted(set(req.kset))), req.dt, now)
        self.pending_rotx[req.op] = p
        if req.dt <= self.gst:
            return self._start_slices(req.op, p)
        return [Note("rotx-parked", {"op": req.op, "server": self.addr,
                                     "dt": req.dt.l, "gst": self.gst.l})]

    def _start_slices(self, op: str, p: GrPendingRotx) -> list:
        p.snapshot = self.gst
        p.waiting = set(p.kset)
        return [Send(server_addr(self.m, placement(k, self.N)), GrSliceReq(op, k, p.snapshot))
                for k in p.kset]

    def handle_slice(self, src: str, req: GrSliceReq) -> list:
        self._check_hosts(req.k)
        d = self.store.read_where(req.k, lambda d: d.ut <= req.snapshot)
        if d is None:
            return [Send(src, GrSliceReply(req.txn, req.k, None, None))]
        return [Send(src, GrSliceReply(req.txn, req.k, d.v, d.ref))]

    def handle_slice_reply(self, rep: GrSliceReply) -> list:
        p = self.pending_rotx[rep.txn]
        p.waiting.discard(rep.k)
        p.vset[rep.k] = (rep.v, rep.ver)
        if p.waiting:
            return []
        del self.pending_rotx[rep.txn]
        uts = [ver.ut for _, ver in p.vset.values() if ver is not None]
        return [Send(p.client, GrRotxReply(rep.txn, p.vset, self.gst, max(uts, default=ZERO)))]

    def visible_winners(self) -> dict:
        return {k: d.ref for k in self.store.chains if (d := self.read(k)) is not None}

    def state(self) -> dict:
        return {"vv": list(self.vv), "gst": self.gst}


@dataclass
class GrClientSession:
    id: str
    home: int
    n_replicas: int
    n_partitions: int
    dt: Hlc = ZERO
    gst: Hlc = ZERO

    def check_replica(self, m: int) -> None:
        from .client import StickinessViolation

        if m != self.home:
            raise StickinessViolation(f"session {self.id} is bound to replica {self.home}, not {m}")

    def partition_of(self, k: str) -> int:
        return placement(k, self.n_partitions)

    def get_request(self, op: str, k: str):
        return self.partition_of(k), GrGetReq(op, k, self.gst)

    def get_complete(self, reply: GrGetReply):
        self.dt = max(self.dt, reply.ut)
        self.gst = max(self.gst, reply.gst)
        return reply.v

    def put_request(self, op: str, k: str, v):
        return self.partition_of(k), GrPutReq(op, k, v, self.dt)

    def put_complete(self, reply: GrPutReply):
        self.dt = max(self.dt, reply.ut)
        return reply.ut, reply.sr

    def rotx_request(self, op: str, keys):
        kset = tuple(sorted(set(keys)))
        if not kset:
            raise ContractViolation("read-only transaction over no keys")
        coordinator = min(self.partition_of(k) for k in kset)
        return coordinator, GrRotx(op, kset, self.dt, self.gst)

    def rotx_complete(self, reply: GrRotxReply) -> dict:
        self.dt = max(self.dt, reply.ut)
        self.gst = max(self.gst, reply.gst)
        return {k: v for k, (v, _) in reply.vset.items()}

    def snapshot(self) -> dict:
        return {"dt": self.dt, "gst": self.gst}

