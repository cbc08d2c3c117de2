import io
import math

import pytest

from causalkv.core import ConfigError, keys_for_partitions
from causalkv.protocols import by_name
from causalkv.simnet import (ClientProgram, Cut, Get, Put, SimConfig, Simulation, Sleep, dump_jsonl,
                             load_jsonl)
from causalkv.workloads import soak

from conftest import simulate


def small_soak(seed, protocol="hlc-dsv", jitter=15.0, cuts=()):
    cfg = SimConfig(M=3, N=2, link_latency=[[0, 20, 40], [20, 0, 30], [40, 30, 0]], jitter=jitter,
                    skew={"p0.0": 7.0, "p2.1": -11.0}, seed=seed, duration=1e9, cuts=list(cuts))
    return simulate(cfg, protocol, soak(3, 2, 150, seed))


@pytest.mark.parametrize("protocol", ["hlc-dsv", "gentlerain"])
def test_same_seed_same_trace(protocol):
    a, b = small_soak(3, protocol), small_soak(3, protocol)
    fa, fb = io.StringIO(), io.StringIO()
    dump_jsonl(a.trace, fa)
    dump_jsonl(b.trace, fb)
    assert fa.getvalue() == fb.getvalue()
    assert small_soak(4, protocol).trace != a.trace


def test_trace_survives_jsonl_roundtrip():
    sim = small_soak(1)
    buf = io.StringIO()
    dump_jsonl(sim.trace, buf)
    buf.seek(0)
    back = load_jsonl(buf)
    assert [e.to_json() for e in back] == [e.to_json() for e in sim.trace]


def test_channels_are_fifo_under_jitter():
    sim = small_soak(2, jitter=40.0)
    sent = {e.payload["id"]: e.seq for e in sim.trace if e.kind == "msg-send"}
    last = {}
    for e in sim.trace:
        if e.kind == "msg-recv":
            pair = (e.payload["src"], e.payload["dst"])
            assert sent[e.payload["id"]] > last.get(pair, -1)
            last[pair] = sent[e.payload["id"]]


def test_nothing_crosses_an_active_cut():
    cut = Cut(100.0, 300.0, 0, 2)
    sim = small_soak(5, cuts=[cut])
    sends = {e.payload["id"]: e for e in sim.trace if e.kind == "msg-send"}
    crossing = 0
    for e in sim.trace:
        if e.kind != "msg-recv":
            continue
        src, dst = e.payload["src"], e.payload["dst"]
        if {src[1:2], dst[1:2]} == {"0", "2"} and src.startswith("p") and dst.startswith("p"):
            crossing += 1
            assert not cut.start <= e.t < cut.end
            if cut.start <= sends[e.payload["id"]].t < cut.end:
                assert e.t >= cut.end
    assert crossing


def test_permanent_cut_is_reported_at_quiescence():
    sim = small_soak(6, cuts=[Cut(50.0, math.inf, 1, 2)])
    [q] = [e for e in sim.trace if e.kind == "state-assert" and e.payload["what"] == "quiescence"]
    assert q.payload["cut"] == [[1, 2]]


def test_skewed_physical_clock():
    cfg = SimConfig(M=1, N=2, skew={"p0.0": 2.5, "p0.1": -3.0})
    sim = Simulation(cfg, by_name("hlc-dsv"))
    sim.now = 10.2
    assert sim.pt("p0.0") == 12 and sim.pt("p0.1") == 7
    sim.now = 1.0
    assert sim.pt("p0.1") == 0  # clamped
    assert sim.pt("p0.1", sim.earliest("p0.1", 5)) == 5


def test_client_program_sees_values():
    k = keys_for_partitions(1, 1)[0]
    seen = []

    def body(session):
        yield Put(k, 41)
        yield Sleep(3)
        seen.append((yield Get(k)))

    sim = simulate(SimConfig(M=2, N=1), "hlc-dsv", [ClientProgram("a", 1, body)])
    assert seen == [41]
    assert [o.kind for o in sim.ops] == ["put", "get"]
    assert sim.ops[1].start - sim.ops[0].end == 3


@pytest.mark.parametrize("kw", [
    {"M": 0},
    {"jitter": -1.0},
    {"theta": 0.0},
    {"link_latency": [[0, 1]]},
    {"M": 2, "cuts": [{"start": 0, "end": 5, "a": 1, "b": 1}]},
    {"M": 2, "cuts": [{"start": 5, "end": 1, "a": 0, "b": 1}]},
    {"slow": {"p0.0": -1}},
])
def test_bad_configs_are_rejected(kw):
    with pytest.raises(ConfigError):
        SimConfig(**kw)


def test_unknown_server_or_field():
    with pytest.raises(ConfigError):
        Simulation(SimConfig(skew={"p9.0": 1.0}), by_name("hlc-dsv"))
    with pytest.raises(ConfigError):
        SimConfig.from_json({"M": 1, "colour": "red"})
    with pytest.raises(ConfigError):
        by_name("eventual")


def test_config_json_roundtrip():
    cfg = SimConfig(M=2, N=3, cuts=[Cut(1.0, 2.0, 0, 1)], slow={"p0.1": 4.0})
    assert SimConfig.from_json(cfg.to_json()) == cfg


def test_duplicate_client_ids():
    def body(session):
        yield Sleep(1)

    with pytest.raises(ConfigError):
        simulate(SimConfig(), "hlc-dsv", [ClientProgram("a", 0, body), ClientProgram("a", 0, body)])
    with pytest.raises(ConfigError):
        simulate(SimConfig(), "hlc-dsv", [ClientProgram("a", 3, body)])
