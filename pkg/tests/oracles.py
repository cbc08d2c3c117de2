"""Random small instances and brute-force answers, shared by unit and acceptance tests."""

import random

from causalkv import checker
from causalkv.checker import History, Op
from causalkv.core import Version, visible_in_snapshot, visible_under
from causalkv.hlc import C_LIMIT, L_LIMIT, Hlc, compare, encode
from causalkv.storage import Store

M = 3


def lww_max(candidates):
    return max(candidates, key=lambda d: d.order, default=None)


def random_version(rng, k="k"):
    ut = Hlc(rng.randrange(12), rng.randrange(3))
    ds = {j: Hlc(rng.randrange(12), rng.randrange(3)) for j in range(M) if rng.random() < 0.5}
    return Version(k, rng.random(), ut, rng.randrange(M), ds)


def random_vector(rng):
    return tuple(Hlc(rng.randrange(14), rng.randrange(3)) for _ in range(M))


def storage_mismatches(n, seed="storage-oracle") -> int:
    """Compare every store read path with max-over-filter on ``n`` chains of <= 8 versions."""
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        versions = {}
        for _ in range(rng.randint(0, 8)):
            d = random_version(rng)
            versions[d.order] = d  # a re-insert of the same identity replaces
        s = Store()
        for d in versions.values():
            s.insert(d)
        vals = list(versions.values())
        local = rng.randrange(M)
        dsv, sv = random_vector(rng), random_vector(rng)
        bad += s.read_visible("k", local, dsv) != lww_max([d for d in vals if visible_under(d, local, dsv)])
        bad += s.read_snapshot("k", sv) != lww_max([d for d in vals if visible_in_snapshot(d, sv)])
        bad += s.latest("k") != lww_max(vals)
    return bad


def random_history(rng, max_ops=30, keys="abc", clients=3):
    """Ops in a global order; reads only return writes issued earlier."""
    ops, writes = [], []
    used = set()
    counts = {}
    for _ in range(rng.randint(1, max_ops)):
        c = f"c{rng.randrange(clients)}"
        counts[c] = counts.get(c, 0) + 1
        op_id = f"{c}#{counts[c]}"
        kind = rng.choice(["get", "put", "rotx"])
        if kind == "put":
            k = rng.choice(keys)
            while True:
                ref = (k, encode(Hlc(rng.randrange(20), rng.randrange(2))), rng.randrange(3))
                if ref not in used:
                    break
            used.add(ref)
            writes.append(ref)
            o = Op(c, op_id, "put", 0, (k,), write=ref)
        else:
            ks = (rng.choice(keys),) if kind == "get" else tuple(sorted(rng.sample(keys, 2)))
            reads = {}
            for k in ks:
                mine = [w for w in writes if w[0] == k]
                reads[k] = rng.choice(mine) if mine and rng.random() < 0.85 else None
            o = Op(c, op_id, kind, 0, ks, reads=reads)
        o.start_seq = o.end_seq = len(ops)
        ops.append(o)
    return History(ops)


def checker_mismatches(n, seed="checker-oracle") -> tuple[int, int]:
    """(mismatching histories, histories with a violation) over ``n`` random histories."""
    rng = random.Random(seed)
    bad = flagged = 0
    for _ in range(n):
        h = random_history(rng)
        want = checker.brute_force(h)
        bad += checker.graph_relations(h) != want
        flagged += bool(want[1])
    return bad, flagged


def random_stamp(rng):
    # mostly small values so equal l (and equal stamps) come up often
    if rng.random() < 0.8:
        return Hlc(rng.randrange(4), rng.randrange(4))
    return Hlc(rng.randrange(L_LIMIT), rng.randrange(C_LIMIT))


def encoding_mismatches(n, seed="hlc-order") -> int:
    """Pairs whose encoded integers compare differently from the timestamps."""
    rng = random.Random(seed)
    bad = 0
    for _ in range(n):
        a, b = random_stamp(rng), random_stamp(rng)
        ea, eb = encode(a), encode(b)
        bad += ((ea > eb) - (ea < eb)) != compare(a, b)
    return bad
