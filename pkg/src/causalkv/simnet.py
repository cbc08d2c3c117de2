"""Deterministic discrete-event simulator.

Simulated time is a float in milliseconds.  Each server reads a skewed
physical clock ``floor(now + skew)`` (clamped at 0).  Messages between
replicas pay the configured one-way latency plus seeded jitter; messages
inside a replica (including client traffic) pay ``intra_dc_latency``.  Every
ordered pair of endpoints is a FIFO channel.  Messages sent across a cut, or
due to arrive during one, are held until the cut heals.

Clients are generator programs that yield operations and receive results::

    def writer(session):
        yield Put("x", 1)
        value = yield Get("x")
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable

from .core import ConfigError, VersionRef, ds_to_json
from .hlc import Hlc, encode
from .messages import to_json


def server_addr(m: int, n: int) -> str:
    return f"p{m}.{n}"


def replica_of(addr: str) -> int:
    """Replica index of a server address; clients are not addressed through this."""
    return int(addr[1:].split(".")[0])


# -- actions returned by server handlers ---------------------------------------

@dataclass(frozen=True, slots=True)
class Send:
    dst: str
    msg: Any


@dataclass(frozen=True, slots=True)
class Wakeup:
    """Call ``on_wakeup`` once the server's physical clock reads at least ``pt``."""

    pt: int


@dataclass(frozen=True, slots=True)
class Note:
    kind: str
    payload: dict


# -- client operations ------------------------------------------------------------

@dataclass(frozen=True)
class Get:
    k: str


@dataclass(frozen=True)
class Put:
    k: str
    v: Any


@dataclass(frozen=True)
class Rotx:
    keys: tuple


@dataclass(frozen=True)
class Sleep:
    ms: float


@dataclass
class ClientProgram:
    id: str
    home: int
    body: Callable  # session -> generator
    start: float = 0.0


# -- configuration ----------------------------------------------------------------

@dataclass
class Cut:
    start: float
    end: float
    a: int
    b: int

    def covers(self, x: int, y: int) -> bool:
        return {x, y} == {self.a, self.b}


@dataclass
class SimConfig:
    M: int = 1
    N: int = 1
    skew: dict = field(default_factory=dict)  # server address -> ms offset
    link_latency: list | float = 10.0  # one-way ms, scalar or M x M matrix
    jitter: float = 0.0  # uniform extra delay in [0, jitter) on inter-replica links
    intra_dc_latency: float = 0.5
    theta: float = 5.0
    delta: float = 10.0
    seed: int = 0
    duration: float = 1000.0  # hard stop for client programs
    cuts: list = field(default_factory=list)
    slow: dict = field(default_factory=dict)  # server address -> extra send delay
    pair_delay: dict = field(default_factory=dict)  # "src>dst" -> extra delay on that channel
    settle: float | None = None  # quiet time after the workload; derived if None

    def __post_init__(self) -> None:
        self.cuts = [c if isinstance(c, Cut) else Cut(**c) for c in self.cuts]
        self.validate()

    def validate(self) -> None:
        if self.M < 1 or self.N < 1:
            raise ConfigError("M and N must be at least 1")
        if self.intra_dc_latency < 0 or self.jitter < 0:
            raise ConfigError("latencies must be non-negative")
        if self.theta <= 0 or self.delta <= 0:
            raise ConfigError("timer periods must be positive")
        if any(x < 0 for x in [*self.slow.values(), *self.pair_delay.values()]):
            raise ConfigError("extra delays must be non-negative")
        for row in self.latency_matrix():
            if any(x < 0 for x in row):
                raise ConfigError("latencies must be non-negative")
        for c in self.cuts:
            if c.a == c.b:
                raise ConfigError("cuts only separate distinct data centers")
            if not (0 <= c.a < self.M and 0 <= c.b < self.M) or c.end < c.start:
                raise ConfigError(f"bad cut {c}")

    def latency_matrix(self) -> list[list[float]]:
        if isinstance(self.link_latency, (int, float)):
            return [[float(self.link_latency)] * self.M for _ in range(self.M)]
        if len(self.link_latency) != self.M or any(len(r) != self.M for r in self.link_latency):
            raise ConfigError("link_latency matrix must be M x M")
        return [[float(x) for x in row] for row in self.link_latency]

    def max_skew(self) -> float:
        return max([0.0, *map(abs, self.skew.values())])

    def settle_time(self) -> float:
        if self.settle is not None:
            return self.settle
        lat = max(max(r) for r in self.latency_matrix())
        slow = max([0.0, *self.slow.values()]) + max([0.0, *self.pair_delay.values()])
        return 4 * self.max_skew() + 2 * (lat + self.jitter + slow) + 4 * (self.theta + self.delta) + 20

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, raw: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)


# -- trace ----------------------------------------------------------------------------

@dataclass(slots=True)
class TraceEvent:
    seq: int
    t: float
    kind: str
    actor: str
    payload: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "t": self.t, "kind": self.kind, "actor": self.actor,
                "payload": self.payload}


def dump_jsonl(events: Iterable[TraceEvent], fh) -> None:
    for e in events:
        fh.write(json.dumps(e.to_json(), sort_keys=True, separators=(",", ":")))
        fh.write("\n")


def load_jsonl(fh) -> list[TraceEvent]:
    out = []
    for line in fh:
        line = line.strip()
        if line:
            raw = json.loads(line)
            out.append(TraceEvent(raw["seq"], raw["t"], raw["kind"], raw["actor"], raw["payload"]))
    return out


@dataclass
class OpRecord:
    client: str
    op: str
    kind: str
    start: float
    end: float | None = None
    args: dict = field(default_factory=dict)
    result: Any = None


class SimulationError(RuntimeError):
    pass


class Simulation:
    """One run of a protocol over a fixed configuration.

    ``protocol`` supplies ``partition(m, n, config)`` and
    ``session(id, home, config)`` factories (see :mod:`causalkv.protocols`).
    """

    def __init__(self, config: SimConfig, protocol, trace: bool = True) -> None:
        self.config = config
        self.protocol = protocol
        self.record_trace = trace
        self.now = 0.0
        self._seq = 0
        self._heap: list = []
        self.trace: list[TraceEvent] = []
        self.ops: list[OpRecord] = []
        self._latency = config.latency_matrix()
        self._last_arrival: dict[tuple[str, str], float] = {}
        self._streams: dict[tuple[str, str], random.Random] = {}
        self._msg_id = 0
        self.servers = {
            server_addr(m, n): protocol.partition(m, n, config)
            for m in range(config.M) for n in range(config.N)
        }
        for addr in config.skew:
            if addr not in self.servers:
                raise ConfigError(f"skew given for unknown server {addr}")
        for addr in config.slow:
            if addr not in self.servers:
                raise ConfigError(f"slowdown given for unknown server {addr}")
        self.clients: dict[str, _ClientRunner] = {}
        self._active = 0  # client programs not yet finished
        self._homes = {addr: replica_of(addr) for addr in self.servers}
        self._cuts: dict[tuple[int, int], list[Cut]] = {}
        for c in config.cuts:
            self._cuts.setdefault((c.a, c.b), []).append(c)
            self._cuts.setdefault((c.b, c.a), []).append(c)
        self.workload_done_at = 0.0
        self.stats: dict[str, Any] = {}

    # -- clock & scheduling -------------------------------------------------------
    def pt(self, addr: str, now: float | None = None) -> int:
        t = self.now if now is None else now
        return max(0, math.floor(t + self.config.skew.get(addr, 0.0)))

    def earliest(self, addr: str, pt: int) -> float:
        """First simulated instant (not before now) at which ``addr`` reads ``pt``."""
        skew = self.config.skew.get(addr, 0.0)
        t = max(self.now, pt - skew)
        while self.pt(addr, t) < pt:
            t = math.nextafter(t, math.inf)
        return t

    def schedule(self, at: float, fn: Callable, *args) -> None:
        if at < 0 or at < self.now:
            raise SimulationError(f"cannot schedule at {at} (now {self.now})")
        self._seq += 1
        heapq.heappush(self._heap, (at, self._seq, fn, args))

    def emit(self, kind: str, actor: str, payload: dict) -> None:
        if self.record_trace:
            self.trace.append(TraceEvent(len(self.trace), self.now, kind, actor, payload))

    # -- network ---------------------------------------------------------------------
    def _home(self, addr: str) -> int:
        return self._homes[addr]

    def _jitter(self, src: str, dst: str) -> float:
        if self.config.jitter <= 0:
            return 0.0
        rng = self._streams.get((src, dst))
        if rng is None:
            rng = self._streams[(src, dst)] = random.Random(f"{self.config.seed}:{src}:{dst}:jitter")
        return rng.uniform(0.0, self.config.jitter)

    def send(self, src: str, dst: str, msg) -> None:
        a, b = self._home(src), self._home(dst)
        if a == b:
            delay = 0.0 if src == dst else self.config.intra_dc_latency
        else:
            delay = self._latency[a][b] + self._jitter(src, dst)
        delay += self.config.slow.get(src, 0.0)
        if self.config.pair_delay:
            delay += self.config.pair_delay.get(f"{src}>{dst}", 0.0)
        arrival = self.now + delay
        if a != b and self._cuts:
            for c in self._cuts.get((a, b), ()):
                if c.start <= self.now < c.end or c.start <= arrival < c.end:
                    arrival = max(arrival, c.end)
        pair = (src, dst)
        arrival = max(arrival, self._last_arrival.get(pair, 0.0))
        self._last_arrival[pair] = arrival
        self._msg_id += 1
        if self.record_trace:
            body = to_json(msg)
            body.update(id=self._msg_id, src=src, dst=dst)
            self.emit("msg-send", src, body)
        else:
            body = None
        self.schedule(arrival, self._deliver, src, dst, msg, self._msg_id, body)

    def _deliver(self, src: str, dst: str, msg, msg_id: int, body) -> None:
        if self.record_trace:
            self.emit("msg-recv", dst, {"id": msg_id, "src": src, "dst": dst, "type": body["type"]})
        if dst in self.servers:
            self._run_actions(dst, self.servers[dst].on_message(src, msg, self.now, self.pt(dst)))
        else:
            self.clients[dst].on_reply(msg)

    def _run_actions(self, addr: str, actions: list) -> None:
        for a in actions:
            if type(a) is Send:
                self.send(addr, a.dst, a.msg)
            elif type(a) is Note:
                self.emit(a.kind, addr, a.payload)
            elif type(a) is Wakeup:
                self.schedule(self.earliest(addr, a.pt), self._wakeup, addr)
            else:
                raise SimulationError(f"unknown action {a!r}")

    def _wakeup(self, addr: str) -> None:
        self._run_actions(addr, self.servers[addr].on_wakeup(None, self.now, self.pt(addr)))

    def _timer(self, addr: str, name: str, period: float, tick: int) -> None:
        if self.record_trace:
            self.emit("timer", addr, {"timer": name, "tick": tick})
        self._run_actions(addr, self.servers[addr].on_timer(name, tick, self.now, self.pt(addr)))
        self.schedule(self.now + period, self._timer, addr, name, period, tick + 1)

    # -- running -------------------------------------------------------------------------
    def add_client(self, program: ClientProgram) -> None:
        if program.id in self.clients or program.id in self.servers:
            raise ConfigError(f"duplicate actor id {program.id}")
        if not 0 <= program.home < self.config.M:
            raise ConfigError(f"client {program.id} homed at unknown replica {program.home}")
        session = self.protocol.session(program.id, program.home, self.config)
        runner = _ClientRunner(self, program, session)
        self.clients[program.id] = runner
        self._homes[program.id] = program.home
        self._active += 1
        self.schedule(program.start, runner.resume, None)

    def run(self, programs: Iterable[ClientProgram] = ()) -> "Simulation":
        for p in programs:
            self.add_client(p)
        self.emit("run", "sim", {"protocol": self.protocol.name, "config": self.config.to_json()})
        for addr in sorted(self.servers):
            self.schedule(self.config.theta, self._timer, addr, "dsv", self.config.theta, 1)
            self.schedule(self.config.delta, self._timer, addr, "heartbeat", self.config.delta, 1)
        # Phase 1: until every client program finishes (or the hard stop).
        while self._heap and not self._clients_done():
            if self._heap[0][0] > self.config.duration:
                break
            self._step()
        self.workload_done_at = self.now
        # Phase 2: quiet period so replication and stabilization catch up.
        # Cuts that heal are waited out; a cut that never heals stays in place.
        healed = [c.end for c in self.config.cuts if math.isfinite(c.end)]
        horizon = max([self.now, *healed]) + self.config.settle_time()
        while self._heap and self._heap[0][0] <= horizon:
            self._step()
        self.now = horizon
        self._final_dump()
        return self

    def _clients_done(self) -> bool:
        return self._active == 0

    def _step(self) -> None:
        at, _, fn, args = heapq.heappop(self._heap)
        self.now = at
        fn(*args)

    def _final_dump(self) -> None:
        cut_at_end = sorted({(min(c.a, c.b), max(c.a, c.b)) for c in self.config.cuts
                             if c.start <= self.now < c.end})
        self.emit("state-assert", "sim", {"what": "quiescence", "cut": [list(p) for p in cut_at_end],
                                          "M": self.config.M, "N": self.config.N})
        for addr in sorted(self.servers):
            s = self.servers[addr]
            self.emit("state-assert", addr, {
                "what": "final-store",
                "visible": {k: r.to_json() for k, r in sorted(s.visible_winners().items())},
                "latest": {k: s.store.latest(k).ref.to_json() for k in sorted(s.store.chains)},
            })
        self.stats = {
            "max_c": max(s.max_c for s in self.servers.values()),
            "max_lead": max(s.max_lead for s in self.servers.values()),
            "events": len(self.trace),
            "messages": self._msg_id,
        }


class _ClientRunner:
    def __init__(self, sim: Simulation, program: ClientProgram, session) -> None:
        self.sim = sim
        self.program = program
        self.session = session
        self.home = program.home
        self.id = program.id
        self.gen = program.body(session)
        self.done = False
        self.started = False
        self.count = 0
        self.current: OpRecord | None = None

    def resume(self, value) -> None:
        try:
            if self.started:
                op = self.gen.send(value)
            else:
                self.started = True
                op = next(self.gen)
        except StopIteration:
            self._finish()
            return
        if self.sim.now > self.sim.config.duration:
            self.gen.close()
            self._finish()
            return
        if isinstance(op, Sleep):
            self.count += 1
            self.sim.schedule(self.sim.now + op.ms, self.resume, None)
            return
        self.count += 1
        op_id = f"{self.id}#{self.count}"
        s = self.session
        if isinstance(op, Get):
            part, req = s.get_request(op_id, op.k)
            rec = OpRecord(self.id, op_id, "get", self.sim.now, args={"k": op.k})
        elif isinstance(op, Put):
            part, req = s.put_request(op_id, op.k, op.v)
            rec = OpRecord(self.id, op_id, "put", self.sim.now, args={"k": op.k, "v": op.v})
        elif isinstance(op, Rotx):
            part, req = s.rotx_request(op_id, op.keys)
            rec = OpRecord(self.id, op_id, "rotx", self.sim.now, args={"keys": list(req.kset)})
        else:
            raise SimulationError(f"client {self.id} yielded unknown operation {op!r}")
        s.check_replica(self.home)
        self.current = rec
        self.sim.ops.append(rec)
        self.sim.emit("op-start", self.id, {"op": op_id, "kind": rec.kind, "replica": self.home,
                                            "partition": part, **rec.args})
        self.sim.send(self.id, server_addr(self.home, part), req)

    def _finish(self) -> None:
        if not self.done:
            self.done = True
            self.sim._active -= 1

    def on_reply(self, reply) -> None:
        rec = self.current
        if rec is None or reply.op != rec.op:
            raise SimulationError(f"client {self.id} got an unexpected reply {reply!r}")
        s = self.session
        payload: dict = {"op": rec.op, "kind": rec.kind}
        if rec.kind == "get":
            result = s.get_complete(reply)
            payload["k"] = rec.args["k"]
            payload["ver"] = reply.ver.to_json() if reply.ver else None
            payload["v"] = result
        elif rec.kind == "put":
            result = s.put_complete(reply)
            ut, sr = result
            payload["ver"] = VersionRef(rec.args["k"], ut, sr).to_json()
        else:
            result = s.rotx_complete(reply)
            payload["vset"] = {k: (ver.to_json() if ver else None)
                               for k, (_, ver) in sorted(reply.vset.items())}
        payload["session"] = _session_json(s.snapshot())
        rec.end = self.sim.now
        rec.result = result
        rec.args["reply"] = reply
        self.current = None
        self.sim.emit("op-end", self.id, payload)
        self.resume(result)


def _session_json(state: dict) -> dict:
    out = {}
    for k, v in state.items():
        if isinstance(v, Hlc):
            out[k] = encode(v)
        elif isinstance(v, dict):
            out[k] = ds_to_json(v)
        else:
            out[k] = [encode(h) for h in v]
    return out
