"""Trace mutations used to check that the checker notices real faults.

Each function takes a trace (list of TraceEvent), returns a mutated deep
copy and never touches the input.  ``NoCandidate`` means the trace has no
spot where the fault can be planted.
"""

from __future__ import annotations

import copy

from .checker import READ_REPLIES, ROTX_REPLIES, build_graph, history_from_trace


class NoCandidate(LookupError):
    pass


def regress_dsv(trace: list) -> list:
    """Make one stable-vector entry in a reply go below what the same server
    already reported."""
    out = copy.deepcopy(trace)
    best: dict = {}
    for e in out:
        if e.kind != "msg-send" or e.payload["type"] not in READ_REPLIES | ROTX_REPLIES:
            continue
        p = e.payload
        field = "gst" if "gst" in p else "dsv"
        src = p["src"]
        if src in best:
            prev_e, j = best[src]
            if field == "gst":
                p["gst"] = prev_e.payload["gst"] - 1
            else:
                p["dsv"][j] = prev_e.payload["dsv"][j] - 1
            return out
        if field == "gst":
            if p["gst"] > 0:
                best[src] = (e, None)
        else:
            for j, t in enumerate(p["dsv"]):
                if t > 0:
                    best[src] = (e, j)
                    break
    raise NoCandidate("no server reported a non-zero stable entry twice")


def reorder_fifo(trace: list) -> list:
    """Swap the delivery order of two messages on one replica-to-replica channel."""
    out = copy.deepcopy(trace)
    last: dict = {}
    for i, e in enumerate(out):
        if e.kind != "msg-recv":
            continue
        src, dst = e.payload["src"], e.payload["dst"]
        if not (src.startswith("p") and dst.startswith("p")) or src.split(".")[0] == dst.split(".")[0]:
            continue
        pair = (src, dst)
        if pair in last:
            a = out[last[pair]].payload
            b = e.payload
            a["id"], b["id"] = b["id"], a["id"]
            a["type"], b["type"] = b["type"], a["type"]
            return out
        last[pair] = i
    raise NoCandidate("no channel between replicas carried two messages")


def cross_snapshot(trace: list) -> list:
    """Rewrite one transaction so it returns a version together with an
    older-than-required version of another key it depends on."""
    h = history_from_trace(trace)
    g, _ = build_graph(h)
    for o in h.ops:
        if o.kind != "rotx":
            continue
        for k1, v1 in o.reads.items():
            if v1 is None:
                continue
            deps = g.deps(v1)
            for k2 in o.reads:
                if k2 != k1 and g.top(deps, k2) >= 0:
                    return _set_rotx_read(trace, o.op, k2, None)
    raise NoCandidate("no transaction returned a version with a dependency inside its key set")


def _set_rotx_read(trace, op, k, ref) -> list:
    out = copy.deepcopy(trace)
    for e in out:
        if e.kind == "op-end" and e.payload["op"] == op:
            e.payload["vset"][k] = ref
            return out
    raise NoCandidate(op)


MUTATIONS = {
    "regressed-dsv": regress_dsv,
    "reordered-fifo": reorder_fifo,
    "snapshot-crossing-rotx": cross_snapshot,
}

EXPECTED_CHECK = {
    "regressed-dsv": "dsv-monotonic",
    "reordered-fifo": "fifo",
    "snapshot-crossing-rotx": "rotx-snapshot",
}
