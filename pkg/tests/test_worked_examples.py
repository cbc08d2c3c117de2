"""Hand-traced examples, one per rule, checked against the implementation.

Values were worked out by hand from the update rules, independently of the
code under test.
"""

import pytest

from causalkv import checker, hlc
from causalkv.checker import History, Op
from causalkv.core import (Version, keys_for_partitions, lww_winner, max_ds, sv_max_ds,
                           visible_in_snapshot, visible_under)
from causalkv.gentlerain import GrPartition
from causalkv.hlc import ZERO, Hlc
from causalkv.messages import DsvInstall, GetReq, GrGstInstall, GrGstShare, PutReq, Replicate, Rotx, SliceReq
from causalkv.server import FifoBreach, Partition
from causalkv.simnet import ClientProgram, Cut, Get, Put, SimConfig, Sleep
from causalkv.simnet import Rotx as RotxOp
from causalkv.storage import Store

from conftest import simulate

H = Hlc


# -- clock -----------------------------------------------------------------------

@pytest.mark.parametrize("cur, pt, want", [(H(10, 3), 12, H(12, 0)), (H(10, 3), 9, H(10, 4))])
def test_local_tick(cur, pt, want):
    assert hlc.tick_local(cur, pt) == want


@pytest.mark.parametrize("cur, msg, pt, want", [
    (H(10, 2), H(10, 7), 9, H(10, 8)),
    (H(10, 2), H(15, 4), 9, H(15, 5)),
    (H(10, 2), H(3, 0), 20, H(20, 0)),
])
def test_recv_tick(cur, msg, pt, want):
    assert hlc.tick_recv(cur, msg, pt) == want


@pytest.mark.parametrize("cur, dt, pt, want", [
    (H(10, 1), H(11, 3), 10, H(11, 4)),
    (H(10, 1), H(5, 9), 12, H(12, 0)),
    (H(10, 1), H(10, 1), 10, H(10, 2)),
])
def test_put_tick(cur, dt, pt, want):
    assert hlc.tick_put(cur, dt, pt) == want


def test_encoding_layout():
    assert hlc.encode(H(1, 0)) == 65536
    assert hlc.encode(H(0, 1)) == 1


# -- values --------------------------------------------------------------------

def test_dependency_set_merge():
    assert max_ds({0: H(3, 2)}, {0: H(3, 1)}) == {0: H(3, 2)}
    assert max_ds({0: H(3, 0)}, {1: H(2, 0)}) == {0: H(3, 0), 1: H(2, 0)}


def test_vector_raise():
    assert sv_max_ds((H(1), H(2)), {0: H(5)}) == (H(5), H(2))


def test_lww_examples():
    a, b = Version("k", "a", H(5), 2), Version("k", "b", H(5), 1)
    assert lww_winner(a, b) is a
    a, b = Version("k", "a", H(4, 9), 2), Version("k", "b", H(5), 0)
    assert lww_winner(a, b) is b


def test_visibility_predicates():
    d = Version("k", 1, H(3), 0, {1: H(7)})
    assert not visible_under(d, 2, (ZERO, H(6), ZERO))
    sv = (H(5), H(5))
    assert visible_in_snapshot(Version("k", 1, H(5, 0), 0), sv)
    assert not visible_in_snapshot(Version("k", 1, H(5, 1), 0), sv)


# -- storage ---------------------------------------------------------------------

def test_same_timestamp_higher_replica_is_head():
    s = Store()
    s.insert(Version("k", "b", H(5), 1))
    s.insert(Version("k", "a", H(5), 0))
    assert s.latest("k").sr == 1


def test_blocked_remote_falls_back_to_local():
    s = Store()
    s.insert(Version("k", "local", H(9), 0))
    s.insert(Version("k", "remote", H(10), 1, {2: H(8)}))
    assert s.read_visible("k", 0, (ZERO, H(10), H(7))).v == "local"


def test_snapshot_boundaries():
    s = Store()
    s.insert(Version("k", "mine", H(6), 0))
    assert s.read_snapshot("k", (H(5), H(9))) is None  # own version above sv[local]
    s.insert(Version("k", "edge", H(5), 1, {0: H(5)}))
    assert s.read_snapshot("k", (H(5), H(5))).v == "edge"


# -- server ------------------------------------------------------------------------

K0, K1 = keys_for_partitions(2, 1, "k")


def test_get_raises_dsv_from_client():
    p = Partition(0, 0, 2, 2)
    p.handle_get("c", GetReq("c#1", K0, (ZERO, H(4))))
    assert p.dsv[1] == H(4)


def test_first_put_on_fresh_server():
    p = Partition(0, 0, 2, 2)
    [reply, _] = p.on_message("c", PutReq("c#1", K0, "v", {}), 0.0, 5)
    assert reply.msg.ut == H(5, 0)


def test_put_above_dependency_with_lagging_clock():
    p = Partition(0, 0, 2, 2)
    p.vv[0] = H(10, 1)
    [reply, _] = p.on_message("c", PutReq("c#1", K0, "v", {1: H(11, 3)}), 0.0, 10)
    assert reply.msg.ut == H(11, 4)


def test_replicates_advance_version_vector_and_order_is_enforced():
    p = Partition(0, 0, 2, 2)
    p.on_message("p1.0", Replicate(Version(K0, 1, H(7), 1)), 0.0, 0)
    p.on_message("p1.0", Replicate(Version(K0, 2, H(9), 1)), 0.0, 0)
    assert p.vv[1] == H(9)
    with pytest.raises(FifoBreach):
        p.on_message("p1.0", Replicate(Version(K0, 3, H(8), 1)), 0.0, 0)


def test_dsv_never_goes_down():
    p = Partition(0, 0, 2, 2)
    p.on_message("p0.0", DsvInstall(1, (H(5), H(3))), 0.0, 0)
    p.on_message("p0.0", DsvInstall(2, (H(4), H(6))), 0.0, 0)
    assert p.dsv == (H(5), H(6))


def test_rotx_snapshot_covers_client_dependencies():
    p = Partition(0, 0, 2, 2)
    out = p.on_message("c", Rotx("c#1", (K0, K1), (ZERO, ZERO), {0: H(8), 1: H(3)}), 0.0, 0)
    assert len(out) == 2 and all(a.msg.sv == (H(8), H(3)) for a in out)


def test_slice_raises_own_entry():
    p = Partition(0, 1, 2, 2)
    p.on_message("p0.0", SliceReq("t", K1, (H(9), ZERO)), 0.0, 0)
    assert p.dsv[0] == H(9)


def test_single_local_key_rotx_costs_no_hops():
    k = keys_for_partitions(2, 1, "k")[0]

    def body(session):
        yield RotxOp((k,))

    sim = simulate(SimConfig(M=1, N=2, intra_dc_latency=0.5), "hlc-dsv", [ClientProgram("c", 0, body)])
    [rec] = sim.ops
    assert rec.end - rec.start == 1.0  # the client round trip only


# -- client ------------------------------------------------------------------------

def session_sim(body, M=2, N=2, **kw):
    return simulate(SimConfig(M=M, N=N, **kw), "hlc-dsv", [ClientProgram("c", 0, body)])


def test_read_your_writes_and_rotx_of_own_write():
    got = []

    def body(session):
        yield Put(K0, "x")
        got.append((yield Get(K0)))
        got.append((yield RotxOp((K0, K1))))
        got.append(dict(session.ds))

    session_sim(body)
    assert got[0] == "x" and got[1] == {K0: "x", K1: None}
    assert set(got[2]) == {0}


def test_home_entry_strictly_increases():
    uts = []

    def body(session):
        yield Put(K0, 1)
        uts.append(session.ds[0])
        yield Put(K1, 2)
        uts.append(session.ds[0])

    session_sim(body, skew={"p0.1": -50.0})
    assert uts[1] > uts[0]


def test_remote_dependency_carried_into_new_version():
    out = {}

    def writer(session):
        yield Put(K0, "remote")

    def reader(session):
        yield Sleep(80)
        v = yield Get(K0)
        yield Put(K1, f"saw {v}")
        out["ds"] = dict(session.ds)

    sim = simulate(SimConfig(M=2, N=2), "hlc-dsv",
                   [ClientProgram("w", 1, writer), ClientProgram("r", 0, reader)])
    assert set(out["ds"]) == {0, 1}
    [p] = [s for a, s in sim.servers.items() if a == "p0.1"]
    assert 1 in p.store.latest(K1).ds


# -- GentleRain ------------------------------------------------------------------------

@pytest.mark.parametrize("s", [4, 10])
def test_lagging_server_waits_skew(s):
    def body(session):
        yield Put(K0, 1)
        yield Put(K1, 2)

    sim = simulate(SimConfig(M=1, N=2, skew={"p0.1": -float(s)}, duration=1e9), "gentlerain",
                   [ClientProgram("c", 0, body, start=50.0)])
    waits = checker.put_waits(checker.history_from_trace(sim.trace))
    assert sorted(waits.values()) == pytest.approx([0.0, s - 0.5], abs=1.0)


def test_slow_replica_pins_gst():
    coord = GrPartition(0, 0, 3, 1)
    coord.vv = [H(50), H(40), H(12)]
    [share] = coord.on_timer("dsv", 1, 55.0, 55)
    assert share.msg == GrGstShare(1, H(12))
    coord.on_message("p0.0", share.msg, 55.0, 55)
    coord.on_message("p0.0", GrGstInstall(1, H(12)), 55.0, 55)
    assert coord.gst == H(12)


# -- simulator -----------------------------------------------------------------------

def test_empty_workload_has_only_timers():
    sim = simulate(SimConfig(M=2, N=1, settle=30.0), "hlc-dsv", [])
    kinds = {e.kind for e in sim.trace}
    assert kinds <= {"run", "timer", "msg-send", "msg-recv", "state-assert"}
    types = {e.payload["type"] for e in sim.trace if e.kind == "msg-send"}
    assert types <= {"Heartbeat", "DsvShare", "DsvInstall"}


def test_held_messages_arrive_at_cut_end_in_order():
    def body(session):
        for i in range(3):
            yield Put(K0, i)

    sim = simulate(SimConfig(M=2, N=2, link_latency=5.0, cuts=[Cut(0.0, 40.0, 0, 1)]), "hlc-dsv",
                   [ClientProgram("c", 0, body, start=1.0)])
    recv = [e for e in sim.trace if e.kind == "msg-recv" and e.payload["type"] == "Replicate"]
    assert [e.t for e in recv] == [40.0] * 3
    assert [e.payload["id"] for e in recv] == sorted(e.payload["id"] for e in recv)


def test_heartbeat_never_overtakes_replicate():
    def body(session):
        yield Put(K0, 1)

    # PUT at t=2.5, first heartbeat at t=20; jitter up to 30 ms could reorder them
    sim = simulate(SimConfig(M=2, N=2, link_latency=5.0, jitter=30.0, seed=3), "hlc-dsv",
                   [ClientProgram("c", 0, body, start=2.0)])
    sends = [e.payload for e in sim.trace if e.kind == "msg-send"
             and e.payload["src"] == "p0.0" and e.payload["dst"] == "p1.0"]
    recvs = [e.payload for e in sim.trace if e.kind == "msg-recv"
             and e.payload["src"] == "p0.0" and e.payload["dst"] == "p1.0"]
    assert [m["type"] for m in sends][:2] == ["Replicate", "Heartbeat"]
    assert [m["id"] for m in recvs] == [m["id"] for m in sends][:len(recvs)]


# -- checker -----------------------------------------------------------------------------

def test_dependencies_are_transitive():
    v = ("a", 1, 0)
    w = ("b", 2, 1)
    x = ("c", 3, 2)
    h = History([
        Op("p", "p#1", "put", 0, ("a",), write=v),
        Op("q", "q#1", "get", 1, ("a",), reads={"a": v}),
        Op("q", "q#2", "put", 1, ("b",), write=w),
        Op("r", "r#1", "get", 2, ("b",), reads={"b": w}),
        Op("r", "r#2", "put", 2, ("c",), write=x),
    ])
    g, _ = checker.build_graph(h)
    assert g.dep(x, w) and g.dep(x, v) and g.dep(w, v)
    assert not g.dep(v, w)
