"""Offline consistency checker.

Works on the trace alone; it never looks inside server state except for the
final store dump used by the convergence check.  Both stores are checked
through one schema.

Happens-before over operations has three sources: session order, reads-from
(a write happens before every read that returns it) and transitivity.  Each
operation carries the set of writes that happen before or at it, as an int
bitset.  Writes are numbered in (key, ut, sr) order, so within one key a
larger bit index is a last-writer-wins winner and the highest set bit of
``hb & key_mask`` is the version a reader must at least return.
"""

from __future__ import annotations

import bisect
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .hlc import Hlc, decode, encode

INITIAL = -1  # index of the virtual initial version of every key

READ_REPLIES = {"GetReply", "GrGetReply"}
PUT_REPLIES = {"PutReply", "GrPutReply"}
ROTX_REQUESTS = {"Rotx", "GrRotx"}
ROTX_REPLIES = {"RotxReply", "GrRotxReply"}
SLICE_REQUESTS = {"SliceReq", "GrSliceReq"}
SLICE_REPLIES = {"SliceReply", "GrSliceReply"}
REPLICATES = {"Replicate", "GrReplicate"}


class TraceError(ValueError):
    """The trace cannot be interpreted."""


Ref = tuple  # (k, ut as encoded int, sr)


def ref_from_json(raw) -> Ref | None:
    if raw is None:
        return None
    k, ut, sr = raw
    return (k, int(ut), int(sr))


@dataclass
class Op:
    client: str
    op: str
    kind: str  # get | put | rotx
    replica: int | None = None
    keys: tuple = ()
    reads: dict = field(default_factory=dict)  # key -> Ref | None
    write: Ref | None = None
    start_seq: int = -1
    end_seq: int = -1
    reply_seq: int | None = None  # server-side send of the GetReply


@dataclass
class Violation:
    check: str
    op: str | None
    detail: dict

    def to_json(self) -> dict:
        return {"check": self.check, "op": self.op, **self.detail}


@dataclass
class History:
    """Client operations in session order, plus optional network facts."""

    ops: list[Op]
    sends: dict = field(default_factory=dict)  # msg id -> (seq, t, body)
    recvs: list = field(default_factory=list)  # (seq, t, id, src, dst)
    notes: list = field(default_factory=list)  # (kind, actor, payload)
    final: dict = field(default_factory=dict)  # server -> {"visible", "latest"}
    cut_at_end: set = field(default_factory=set)
    protocol: str | None = None
    M: int | None = None
    N: int | None = None


def history_from_trace(events: Iterable) -> History:
    ops: dict[str, Op] = {}
    order: list[Op] = []
    h = History([])
    for e in events:
        kind, p = e.kind, e.payload
        if kind == "run":
            h.protocol = p.get("protocol")
            cfg = p.get("config", {})
            h.M, h.N = cfg.get("M"), cfg.get("N")
        elif kind == "op-start":
            if p["op"] in ops:
                raise TraceError(f"operation {p['op']} started twice")
            o = Op(e.actor, p["op"], p["kind"], p.get("replica"), start_seq=e.seq)
            if o.kind == "rotx":
                o.keys = tuple(p["keys"])
            else:
                o.keys = (p["k"],)
            ops[o.op] = o
            order.append(o)
        elif kind == "op-end":
            o = ops.get(p["op"])
            if o is None:
                raise TraceError(f"operation {p['op']} ended without starting")
            o.end_seq = e.seq
            if o.kind == "put":
                o.write = ref_from_json(p["ver"])
            elif o.kind == "get":
                o.reads = {o.keys[0]: ref_from_json(p["ver"])}
            else:
                o.reads = {k: ref_from_json(r) for k, r in p["vset"].items()}
        elif kind == "msg-send":
            h.sends[p["id"]] = (e.seq, e.t, p)
        elif kind == "msg-recv":
            h.recvs.append((e.seq, e.t, p["id"], p["src"], p["dst"]))
        elif kind == "state-assert":
            if p.get("what") == "final-store":
                h.final[e.actor] = p
            elif p.get("what") == "quiescence":
                h.cut_at_end = {tuple(c) for c in p.get("cut", [])}
                h.M, h.N = p.get("M", h.M), p.get("N", h.N)
        elif kind in ("put-deferred", "put-released", "rotx-parked", "rotx-released"):
            h.notes.append((kind, e.actor, p))
    for body_seq, _, body in h.sends.values():
        if body["type"] in READ_REPLIES and body["op"] in ops:
            ops[body["op"]].reply_seq = body_seq
    h.ops = [o for o in order if o.end_seq >= 0]
    return h


# -- happens-before ------------------------------------------------------------------

@dataclass
class Graph:
    writes: list  # index -> Ref, sorted by (k, ut, sr)
    index: dict  # Ref -> index
    writer: dict  # Ref -> op id
    key_mask: dict  # k -> bitset of that key's writes
    hb: dict  # op id -> writes happening before or at the op
    before: dict  # op id -> writes happening strictly before it in its own session view
    order: list  # op ids in a topological order
    max_ut_before: dict = field(default_factory=dict)  # op id -> largest ut strictly before it

    def top(self, bits: int, k: str) -> int:
        """Index of the lww-greatest write of ``k`` in ``bits``, or INITIAL."""
        x = bits & self.key_mask.get(k, 0)
        return x.bit_length() - 1 if x else INITIAL

    def deps(self, ref: Ref) -> int:
        """Writes that ``ref`` depends on (excluding itself)."""
        i = self.index[ref]
        return self.hb[self.writer[ref]] & ~(1 << i)

    def dep(self, v1: Ref, v2: Ref) -> bool:
        return bool(self.deps(v1) >> self.index[v2] & 1)


def build_graph(h: History) -> tuple[Graph, list[Violation]]:
    problems: list[Violation] = []
    writer: dict = {}
    for o in h.ops:
        if o.write is not None:
            if o.write in writer:
                problems.append(Violation("duplicate-write", o.op, {"ver": list(o.write)}))
            writer[o.write] = o.op
    writes = sorted(writer, key=lambda r: (r[0], r[1], r[2]))
    index = {r: i for i, r in enumerate(writes)}
    key_mask: dict = defaultdict(int)
    for r, i in index.items():
        key_mask[r[0]] |= 1 << i

    by_id = {o.op: o for o in h.ops}
    prev: dict = {}
    last: dict = {}
    for o in h.ops:
        prev[o.op] = last.get(o.client)
        last[o.client] = o.op

    preds: dict = {}
    for o in h.ops:
        ps = [prev[o.op]] if prev[o.op] else []
        for k, r in o.reads.items():
            if r is None:
                continue
            if r not in writer:
                problems.append(Violation("phantom-read", o.op, {"k": k, "ver": list(r)}))
                continue
            if writer[r] != o.op:
                ps.append(writer[r])
        preds[o.op] = ps

    # Kahn's algorithm in trace order for stable output.
    indeg = {o.op: 0 for o in h.ops}
    succ: dict = defaultdict(list)
    for op, ps in preds.items():
        for p in set(ps):
            indeg[op] += 1
            succ[p].append(op)
    ready = [o.op for o in h.ops if indeg[o.op] == 0]
    ready.reverse()
    topo = []
    while ready:
        op = ready.pop()
        topo.append(op)
        for s in succ[op]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if len(topo) != len(h.ops):
        stuck = sorted(op for op, d in indeg.items() if d > 0)
        raise TraceError(f"happens-before has a cycle through {stuck[:5]}")

    hb: dict = {}
    before: dict = {}
    top_ut: dict = {}  # largest ut at or before each op
    max_before: dict = {}
    for op in topo:
        o = by_id[op]
        b = hb[prev[op]] if prev[op] else 0
        before[op] = b
        bits = b
        mu = -1
        for p in preds[op]:
            bits |= hb[p]
            mu = max(mu, top_ut[p])
        max_before[op] = mu
        if o.write is not None:
            bits |= 1 << index[o.write]
            mu = max(mu, o.write[1])
        hb[op] = bits
        top_ut[op] = mu
    return Graph(writes, index, writer, dict(key_mask), hb, before, topo, max_before), problems


# -- checks ----------------------------------------------------------------------------

def _idx(g: Graph, r: Ref | None) -> int:
    return INITIAL if r is None else g.index.get(r, INITIAL)


def _ref(g: Graph, i: int):
    return None if i == INITIAL else list(g.writes[i])


def check_causal_pp(h: History, g: Graph) -> list[Violation]:
    """Session guarantees (own writes, monotonic reads, read dependencies) for
    every GET and ROTX read, plus immediate visibility of local writes for GET."""
    out = []
    for o in h.ops:
        for k, r in o.reads.items():
            need = g.top(g.before[o.op], k)
            got = _idx(g, r)
            if got < need:
                out.append(Violation("causal++", o.op, {
                    "client": o.client, "k": k, "expected": _ref(g, need), "returned": _ref(g, got)}))
    out += check_local_visibility(h, g)
    return out


def check_local_visibility(h: History, g: Graph) -> list[Violation]:
    # When was each version created at its own replica?  The put reply leaves
    # the server in the same step that stores the version.
    created: dict = defaultdict(list)  # (replica, k) -> [(seq, index)]
    put_ops = {o.op: o for o in h.ops if o.kind == "put"}
    for seq, _, body in h.sends.values():
        if body["type"] in PUT_REPLIES and body["op"] in put_ops:
            w = put_ops[body["op"]].write
            created[(w[2], w[0])].append((seq, g.index[w]))
    prefix: dict = {}
    for key, rows in created.items():
        rows.sort()
        best, seqs, tops = INITIAL, [], []
        for seq, i in rows:
            best = max(best, i)
            seqs.append(seq)
            tops.append(best)
        prefix[key] = (seqs, tops)
    out = []
    for o in h.ops:
        if o.kind != "get" or o.reply_seq is None or o.replica is None:
            continue
        k = o.keys[0]
        seqs, tops = prefix.get((o.replica, k), ((), ()))
        j = bisect.bisect_left(seqs, o.reply_seq)
        if j == 0:
            continue
        need = tops[j - 1]
        got = _idx(g, o.reads[k])
        if got < need:
            out.append(Violation("local-visibility", o.op, {
                "client": o.client, "k": k, "expected": _ref(g, need), "returned": _ref(g, got)}))
    return out


def check_rotx_snapshots(h: History, g: Graph) -> list[Violation]:
    out = []
    for o in h.ops:
        if o.kind != "rotx":
            continue
        for k1, v1 in o.reads.items():
            if v1 is None or v1 not in g.index:
                continue
            deps = g.deps(v1)
            for k2, v2 in o.reads.items():
                need = g.top(deps, k2)
                got = _idx(g, v2)
                if got < need:
                    out.append(Violation("rotx-snapshot", o.op, {
                        "client": o.client, "because": list(v1), "k": k2,
                        "expected": _ref(g, need), "returned": _ref(g, got)}))
    return out


def check_convergence(h: History) -> list[Violation]:
    """Connected replicas agree on every key's winner, and that winner is the
    newest version they hold."""
    out = []
    if not h.final:
        return out
    by_part: dict = defaultdict(dict)
    for addr, dump in h.final.items():
        m, n = (int(x) for x in addr[1:].split("."))
        by_part[n][m] = dump
    for n, reps in sorted(by_part.items()):
        for m, dump in sorted(reps.items()):
            if dump["visible"] != dump["latest"]:
                stale = sorted(k for k in dump["latest"] if dump["visible"].get(k) != dump["latest"][k])
                out.append(Violation("convergence", None, {"server": f"p{m}.{n}", "stale": stale[:10]}))
        ms = sorted(reps)
        for i, a in enumerate(ms):
            for b in ms[i + 1:]:
                if (a, b) in h.cut_at_end:
                    continue
                va, vb = reps[a]["visible"], reps[b]["visible"]
                diff = sorted(k for k in set(va) | set(vb) if va.get(k) != vb.get(k))
                if diff:
                    out.append(Violation("convergence", None, {
                        "servers": [f"p{a}.{n}", f"p{b}.{n}"], "keys": diff[:10]}))
    return out


# -- audits over protocol messages ------------------------------------------------------

def _replica(addr: str) -> int:
    return int(addr[1:].split(".")[0])


def audit_fifo(h: History) -> list[Violation]:
    out = []
    last: dict = {}
    for seq, _, mid, src, dst in sorted(h.recvs):
        pair = (src, dst)
        if pair in last and mid < last[pair]:
            out.append(Violation("fifo", None, {"src": src, "dst": dst, "id": mid, "after": last[pair]}))
        last[pair] = max(mid, last.get(pair, mid))
    return out


def _exposed(body) -> tuple | None:
    """The stable vector (or scalar) a server reveals in this message."""
    t = body["type"]
    if t in ("GetReply", "RotxReply", "DsvInstall"):
        return tuple(body["dsv"])
    if t == "SliceReq":
        return tuple(body["sv"])
    if t in ("GrGetReply", "GrRotxReply", "GrGstInstall"):
        return ("*", body["gst"])
    if t == "GrSliceReq":
        return ("*", body["snapshot"])
    return None


def audit_monotonic(h: History) -> list[Violation]:
    """Stable vectors a server reports to clients never go backwards."""
    out = []
    seen: dict = {}
    for seq, _, body in sorted(h.sends.values(), key=lambda x: x[0]):
        if body["type"] not in READ_REPLIES | ROTX_REPLIES:
            continue
        v = _exposed(body)
        src = body["src"]
        old = seen.get(src)
        if old is not None:
            if v[0] == "*":
                bad = v[1] < old[1]
            else:
                bad = any(a < b for a, b in zip(v, old))
            if bad:
                out.append(Violation("dsv-monotonic", body.get("op"), {
                    "server": src, "before": list(old), "after": list(v)}))
            v = tuple(max(a, b) for a, b in zip(v, old)) if v[0] != "*" else ("*", max(v[1], old[1]))
        seen[src] = v
    return out


def audit_dsv_safety(h: History, g: Graph) -> tuple[list[Violation], int]:
    """Every stable entry a server reveals covers only versions that already
    reached that server's replica."""
    arrived: dict = {}
    for seq, _, mid, src, dst in h.recvs:
        body = h.sends.get(mid, (None, None, None))[2]
        if body and body["type"] in REPLICATES:
            d = body["d"]
            arrived[(_replica(dst), d["k"], d["ut"], d["sr"])] = seq
    replicas = set(_replica(s) for s in h.final) or {_replica(b["src"]) for _, _, b in h.sends.values()
                                                       if b["src"].startswith("p")}
    table: dict = {}
    for i in replicas:
        for j in replicas:
            if i == j:
                continue
            rows = sorted((w[1], arrived.get((i, w[0], w[1], w[2]), float("inf")))
                          for w in g.writes if w[2] == j)
            uts, worst, acc = [], [], -1.0
            for ut, s in rows:
                acc = max(acc, s)
                uts.append(ut)
                worst.append(acc)
            table[(i, j)] = (uts, worst)
    out = []
    checked = 0
    for seq, _, body in h.sends.values():
        v = _exposed(body)
        if v is None or not body["src"].startswith("p"):
            continue
        i = _replica(body["src"])
        entries = [(j, v[1]) for j in replicas if j != i] if v[0] == "*" else \
            [(j, t) for j, t in enumerate(v) if j != i]
        for j, t in entries:
            uts, worst = table.get((i, j), ((), ()))
            n = bisect.bisect_right(uts, t)
            checked += 1
            if n and worst[n - 1] > seq:
                out.append(Violation("dsv-safety", body.get("op") or body.get("txn"), {
                    "server": body["src"], "type": body["type"], "entry": j, "value": str(decode(t)),
                    "seq": seq}))
    return out, checked


def audit_c1(h: History, g: Graph) -> list[Violation]:
    """A version's timestamp exceeds the timestamps of everything it depends on."""
    out = []
    for r in g.writes:
        op = g.writer[r]
        if g.max_ut_before[op] >= r[1]:
            out.append(Violation("c1", op, {"ver": list(r), "max_dep_ut": g.max_ut_before[op]}))
    return out


def put_waits(h: History) -> dict:
    """op id -> server-side delay between receiving a PUT and replying."""
    got: dict = {}
    for seq, t, mid, src, dst in h.recvs:
        body = h.sends.get(mid, (None, None, None))[2]
        if body and body["type"] in ("PutReq", "GrPutReq"):
            got[body["op"]] = t
    out = {}
    for _, t, body in h.sends.values():
        if body["type"] in PUT_REPLIES and body["op"] in got:
            out[body["op"]] = t - got[body["op"]]
    return out


def audit_rotx_messages(h: History) -> dict:
    """Per transaction: client round trips, slice pairs, and whether it parked."""
    per: dict = {o.op: {"requests": 0, "replies": 0, "slices": 0, "slice_replies": 0,
                        "keys": len(o.keys), "parked": 0}
                 for o in h.ops if o.kind == "rotx"}
    for _, _, body in h.sends.values():
        t = body["type"]
        if t in ROTX_REQUESTS and body["op"] in per:
            per[body["op"]]["requests"] += 1
        elif t in ROTX_REPLIES and body["op"] in per:
            per[body["op"]]["replies"] += 1
        elif t in SLICE_REQUESTS and body["txn"] in per:
            per[body["txn"]]["slices"] += 1
        elif t in SLICE_REPLIES and body["txn"] in per:
            per[body["txn"]]["slice_replies"] += 1
    for kind, _, p in h.notes:
        if kind == "rotx-parked" and p["op"] in per:
            per[p["op"]]["parked"] += 1
    return per


def max_counter(h: History) -> int:
    cs = [w[1] & 0xFFFF for o in h.ops if (w := o.write) is not None]
    for _, _, body in h.sends.values():
        if body["type"] == "Heartbeat":
            cs.append(body["hlc"] & 0xFFFF)
    return max(cs, default=0)


# -- verdict ----------------------------------------------------------------------------

def check_history(h: History, limit: int = 50) -> dict:
    try:
        g, problems = build_graph(h)
    except TraceError as e:
        return {"ok": False, "protocol": h.protocol, "error": str(e), "counts": {}, "violations": []}
    groups = {
        "trace": problems,
        "causal++": check_causal_pp(h, g),
        "rotx-snapshot": check_rotx_snapshots(h, g),
        "convergence": check_convergence(h),
        "fifo": audit_fifo(h),
        "dsv-monotonic": audit_monotonic(h),
        "c1": audit_c1(h, g),
    }
    safety, checked = audit_dsv_safety(h, g)
    groups["dsv-safety"] = safety
    rotx = audit_rotx_messages(h)
    waits = put_waits(h)
    counts = {name: len(v) for name, v in groups.items()}
    every = [v for vs in groups.values() for v in vs]
    return {
        "ok": not every,
        "protocol": h.protocol,
        "ops": len(h.ops),
        "writes": len(g.writes),
        "counts": counts,
        "violations": [v.to_json() for v in every[:limit]],
        "max_c": max_counter(h),
        "dsv_safety": {"checked": checked, "violations": len(safety)},
        "put_wait": {"max": max(waits.values(), default=0.0),
                     "mean": sum(waits.values()) / len(waits) if waits else 0.0},
        "rotx": {"count": len(rotx),
                 "parked": sum(1 for r in rotx.values() if r["parked"]),
                 "one_round_trip": all(r["requests"] == 1 and r["replies"] == 1 for r in rotx.values()),
                 "slices_match_keys": all(r["slices"] == r["slice_replies"] == r["keys"]
                                          for r in rotx.values())},
    }


def check_trace(events) -> dict:
    return check_history(history_from_trace(events))


def write_verdict(verdict: dict, fh) -> None:
    json.dump(verdict, fh, indent=2, sort_keys=True)
    fh.write("\n")


# -- brute force ------------------------------------------------------------------------

def brute_force(h: History) -> tuple[set, set]:
    """Dependency pairs and causal++ session violations straight from the
    definitions, for small histories.  Returns (dep pairs, violating reads)."""
    ops = h.ops
    n = len(ops)
    pos = {o.op: i for i, o in enumerate(ops)}
    writer = {o.write: pos[o.op] for o in ops if o.write is not None}
    reach = [0] * n  # reach[i] has bit j when op j happens before op i
    for i, a in enumerate(ops):
        for j, b in enumerate(ops):
            if b.client == a.client and j < i:
                reach[i] |= 1 << j
        for r in a.reads.values():
            if r is not None and writer.get(r, i) != i:
                reach[i] |= 1 << writer[r]
    for k in range(n):
        for i in range(n):
            if reach[i] >> k & 1:
                reach[i] |= reach[k]
    deps = set()
    for v1, i in writer.items():
        for v2, j in writer.items():
            if reach[i] >> j & 1:
                deps.add((v1, v2))

    def lww(r):
        return (-1, -1) if r is None else (r[1], r[2])

    depends_on = defaultdict(set)
    for x, y in deps:
        depends_on[x].add(y)

    bad = set()
    for i, a in enumerate(ops):
        # What the client has written or read so far, and their dependencies.
        seen = set()
        for b in ops[:i]:
            if b.client != a.client:
                continue
            if b.write is not None:
                seen.add(b.write)
            seen.update(r for r in b.reads.values() if r is not None)
        required = set(seen)
        for v in seen:
            required |= depends_on[v]
        for k, got in a.reads.items():
            if any(w[0] == k and lww(got) < lww(w) for w in required):
                bad.add((a.op, k))
    return deps, bad


def graph_relations(h: History) -> tuple[set, set]:
    """Same two relations computed by the bitset graph, for comparison."""
    g, _ = build_graph(h)
    deps = set()
    for v1 in g.writes:
        d = g.deps(v1)
        for i, v2 in enumerate(g.writes):
            if d >> i & 1:
                deps.add((v1, v2))
    bad = {(v.op, v.detail["k"]) for v in check_causal_pp(h, g) if v.check == "causal++"}
    return deps, bad


# -- the non-sticky execution -----------------------------------------------------------

def non_sticky_history() -> History:
    """Six steps: a cut between r=0 and r'=1; c reads k1 and writes k1, k2 at r;
    c' reads k2 at r (the new version, being local) and then k1 at r'.

    The initial versions are written before the cut and replicated to both."""
    v10 = ("k1", encode(Hlc(1, 0)), 0)
    v20 = ("k2", encode(Hlc(2, 0)), 0)
    v11 = ("k1", encode(Hlc(10, 0)), 0)
    v21 = ("k2", encode(Hlc(11, 0)), 0)
    ops = [
        Op("c0", "c0#1", "put", 0, ("k1",), write=v10),
        Op("c0", "c0#2", "put", 0, ("k2",), write=v20),
        Op("c", "c#1", "get", 0, ("k1",), reads={"k1": v10}),
        Op("c", "c#2", "put", 0, ("k1",), write=v11),
        Op("c", "c#3", "put", 0, ("k2",), write=v21),
        Op("c'", "c'#1", "get", 0, ("k2",), reads={"k2": v21}),
        Op("c'", "c'#2", "get", 1, ("k1",), reads={"k1": v10}),
    ]
    for i, o in enumerate(ops):
        o.start_seq, o.end_seq = 2 * i, 2 * i + 1
    return History(ops, cut_at_end={(0, 1)}, protocol="scripted", M=2, N=1)
