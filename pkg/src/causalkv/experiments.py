"""Experiment presets.

Every preset runs both stores on identical workloads and seeds, checks every
trace, and reports metric rows ``(protocol, preset, param, metric, value)``.
A preset's knobs live in a dataclass; a JSON config file may override any of
them (see README for the schema).
"""

from __future__ import annotations

import gc
import random
import statistics
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

from . import workloads
from .checker import check_history, history_from_trace, put_waits
from .core import ConfigError, placement
from .protocols import by_name
from .simnet import Cut, SimConfig, Simulation, server_addr

PROTOCOLS = ("hlc-dsv", "gentlerain")

# Round-trip times (ms) from C to A and to B; visibility_config halves them.
RTT_TO_C = {
    "california": (1.1709114, 0.3201521),
    "oregon": (21.8699663, 20.6107391),
    "virginia": (67.0469505, 61.2305881),
    "ireland": (138.2809544, 139.3212938),
    "sydney": (159.0899451, 158.4004238),
    "singapore": (175.6392972, 175.6030464),
}


def summarize(xs) -> dict:
    xs = sorted(xs)
    if not xs:
        return {"count": 0}
    if len(xs) == 1:
        q = [xs[0]] * 99
    else:
        q = statistics.quantiles(xs, n=100, method="inclusive")
    return {"count": len(xs), "mean": statistics.fmean(xs), "median": statistics.median(xs),
            "p90": q[89], "p99": q[98]}


@dataclass
class Run:
    """One simulation: its label, protocol, trace and checker verdict."""

    label: str
    protocol: str
    param: str
    trace: list
    verdict: dict
    ops: list
    stats: dict


@dataclass
class Result:
    preset: str
    rows: list = field(default_factory=list)
    runs: list = field(default_factory=list)

    def add(self, protocol, param, metric, value) -> None:
        self.rows.append((protocol, self.preset, str(param), metric, value))

    def add_summary(self, protocol, param, name, xs) -> None:
        for stat, value in summarize(xs).items():
            self.add(protocol, param, f"{name}_{stat}", value)

    def value(self, protocol, param, metric):
        for p, _, q, m, v in self.rows:
            if p == protocol and q == str(param) and m == metric:
                return v
        raise KeyError((protocol, param, metric))

    @property
    def ok(self) -> bool:
        return all(r.verdict["ok"] for r in self.runs)


@contextmanager
def relaxed_gc(threshold: int = 200_000):
    """Traces are large and acyclic; frequent young-generation sweeps only cost time."""
    old = gc.get_threshold()
    gc.set_threshold(threshold, old[1], old[2])
    try:
        yield
    finally:
        gc.set_threshold(*old)


def simulate(config: SimConfig, protocol: str, programs, label: str, param: str) -> Run:
    with relaxed_gc():
        sim = Simulation(config, by_name(protocol)).run(programs)
        h = history_from_trace(sim.trace)
        verdict = check_history(h)
    verdict["label"] = label
    ops = [(o.client, o.kind, o.start, o.end, o.args.get("k"), o.args.get("keys"), o.result)
           for o in sim.ops]
    return Run(label, protocol, param, sim.trace, verdict, ops, dict(sim.stats, put_waits=put_waits(h)))


def _job(args):
    config, protocol, factory, label, param, *rest = args
    run = simulate(config, protocol, factory(), label, param)
    if rest and not rest[0]:
        run.trace = []  # checked already; dropped to keep long sweeps small
    return run


def run_all(jobs: list, workers: int = 1) -> list[Run]:
    """``jobs`` are (config, protocol, program factory, label, param[, keep trace]) tuples."""
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_job, jobs))
    return [_job(j) for j in jobs]


# -- presets -------------------------------------------------------------------------------

@dataclass
class PutSkew:
    skews: list = field(default_factory=lambda: [0, 2, 4, 6, 8, 10, 12, 14, 16])
    n_puts: int = 200
    gap: float = 1.0
    protocols: list = field(default_factory=lambda: list(PROTOCOLS))


def _factory(fn: Callable, *args, **kw):
    return _Partial(fn, args, kw)


@dataclass
class _Partial:
    """Picklable deferred workload construction."""

    fn: Callable
    args: tuple
    kw: dict

    def __call__(self):
        return self.fn(*self.args, **self.kw)


def put_skew(cfg: PutSkew, seed: int, workers: int = 1) -> Result:
    """One data center, two partitions; the second one's clock is ``s`` ms behind."""
    res = Result("put-skew")
    jobs = []
    for s in cfg.skews:
        sim_cfg = SimConfig(M=1, N=2, skew={"p0.1": -float(s)}, seed=seed, duration=1e9)
        for p in cfg.protocols:
            jobs.append((sim_cfg, p, _factory(workloads.round_robin_puts, 2, cfg.n_puts, cfg.gap),
                         f"put-skew/{p}/skew={s}", s))
    for run in run_all(jobs, workers):
        res.runs.append(run)
        lat = [end - start for _, kind, start, end, *_ in run.ops if kind == "put"]
        res.add_summary(run.protocol, run.param, "put_latency", lat)
        res.add_summary(run.protocol, run.param, "put_wait", list(run.stats["put_waits"].values()))
        res.add(run.protocol, run.param, "put_deferred", sum(
            1 for e in run.trace if e.kind == "put-deferred"))
    for p in cfg.protocols:
        xs = [float(s) for s in cfg.skews]
        ys = [res.value(p, s, "put_wait_mean") for s in cfg.skews]
        if len(xs) >= 2:
            slope, intercept = statistics.linear_regression(xs, ys)
            res.add(p, "all", "put_wait_slope", slope)
            res.add(p, "all", "put_wait_intercept", intercept)
    return res


@dataclass
class QueryAmp:
    factors: list = field(default_factory=lambda: [1, 10, 50, 100, 500])
    skew: float = 100.0
    N: int = 4
    n_requests: int = 20
    gap: float = 5.0
    protocols: list = field(default_factory=lambda: list(PROTOCOLS))


def query_amp(cfg: QueryAmp, seed: int, workers: int = 1) -> Result:
    """Partition clocks spread evenly over ``[-skew, 0]`` ms."""
    res = Result("query-amp")
    skew = {server_addr(0, n): -cfg.skew * n / max(cfg.N - 1, 1) for n in range(cfg.N)}
    sim_cfg = SimConfig(M=1, N=cfg.N, skew=skew, seed=seed, duration=1e9)
    jobs = [(sim_cfg, p, _factory(workloads.amplified_requests, cfg.N, f, cfg.n_requests, cfg.gap,
                                  seed=seed, start=cfg.skew + 20.0), f"query-amp/{p}/F={f}", f)
            for f in cfg.factors for p in cfg.protocols]
    for run in run_all(jobs, workers):
        res.runs.append(run)
        spans: dict = {}
        for client, _, start, end, *_ in run.ops:
            a, b = spans.get(client, (start, end))
            spans[client] = (min(a, start), max(b, end))
        res.add_summary(run.protocol, run.param, "request_latency", [b - a for a, b in spans.values()])
    for f in cfg.factors:
        if "hlc-dsv" in cfg.protocols and "gentlerain" in cfg.protocols:
            res.add("gentlerain/hlc-dsv", f, "latency_ratio",
                    res.value("gentlerain", f, "request_latency_mean")
                    / res.value("hlc-dsv", f, "request_latency_mean"))
    return res


@dataclass
class Visibility:
    locations: list = field(default_factory=lambda: list(RTT_TO_C))
    a_b_latency: float = 0.5
    N: int = 2
    target: int = 60
    skew: float = 2.0
    protocols: list = field(default_factory=lambda: list(PROTOCOLS))


def visibility_config(location: str, cfg: Visibility, seed: int) -> SimConfig:
    if location not in RTT_TO_C:
        raise ConfigError(f"unknown location {location!r}; known: {sorted(RTT_TO_C)}")
    ca, cb = (x / 2 for x in RTT_TO_C[location])
    ab = cfg.a_b_latency
    matrix = [[0.0, ab, ca], [ab, 0.0, cb], [ca, cb, 0.0]]
    rng = random.Random(f"{seed}:visibility-skew")
    skew = {server_addr(m, n): rng.uniform(-cfg.skew, cfg.skew) for m in range(3) for n in range(cfg.N)}
    return SimConfig(M=3, N=cfg.N, link_latency=matrix, skew=skew, seed=seed, duration=1e9)


def visibility(cfg: Visibility, seed: int, workers: int = 1) -> Result:
    res = Result("visibility")
    jobs = [(visibility_config(loc, cfg, seed), p,
             _factory(workloads.collaborative_counter, cfg.target), f"visibility/{p}/C={loc}", loc)
            for loc in cfg.locations for p in cfg.protocols]
    for run in run_all(jobs, workers):
        res.runs.append(run)
        delays = counter_delays(run.ops)
        res.add_summary(run.protocol, run.param, "visibility", delays)
        span = max(o[3] for o in run.ops)
        res.add(run.protocol, run.param, "updates_per_s", cfg.target / (span / 1000.0))
    return res


def counter_delays(ops) -> list[float]:
    """Time from the end of the PUT writing counter value n to the end of the
    other client's first GET returning n."""
    written = {}
    # PUT results are (ut, sr); the written value is the GET before plus one.
    last_seen: dict = {}
    for client, kind, start, end, k, _, result in sorted(ops, key=lambda o: o[3]):
        if kind == "get":
            last_seen[client] = 0 if result is None else result
        elif kind == "put":
            written[last_seen.get(client, 0) + 1] = (client, end)
    out = []
    done = set()
    for client, kind, start, end, k, _, result in sorted(ops, key=lambda o: o[3]):
        if kind == "get" and result in written and result not in done and written[result][0] != client:
            done.add(result)
            out.append(end - written[result][1])
    return out


@dataclass
class RotxSlow:
    slowdowns: list = field(default_factory=lambda: [0, 100, 500])
    N: int = 6
    slow_partition: int = 5
    n_clients: int = 4
    ops_per_client: int = 100
    hot_keys: int = 3
    size: int = 3
    write_gap: float = 5.0
    protocols: list = field(default_factory=lambda: list(PROTOCOLS))


def rotx_slow(cfg: RotxSlow, seed: int, workers: int = 1) -> Result:
    if not 0 < cfg.slow_partition < cfg.N:
        raise ConfigError("slow_partition must be a partition other than the coordinator 0")
    res = Result("rotx-slow")
    jobs = []
    for s in cfg.slowdowns:
        slow = {server_addr(0, cfg.slow_partition): float(s)} if s else {}
        sim_cfg = SimConfig(M=1, N=cfg.N, slow=slow, seed=seed, duration=1e9)
        for p in cfg.protocols:
            jobs.append((sim_cfg, p, _factory(workloads.hot_key_rotx_mix, cfg.N, cfg.n_clients,
                                              cfg.ops_per_client, seed=seed, hot_keys=cfg.hot_keys,
                                              size=cfg.size, write_gap=cfg.write_gap),
                         f"rotx-slow/{p}/slow={s}", s))
    for run in run_all(jobs, workers):
        res.runs.append(run)
        inv, non = [], []
        for client, kind, start, end, _, keys, _ in run.ops:
            if kind != "rotx":
                continue
            hit = any(placement(k, cfg.N) == cfg.slow_partition for k in keys)
            (inv if hit else non).append(end - start)
        res.add_summary(run.protocol, run.param, "rotx_involving", inv)
        res.add_summary(run.protocol, run.param, "rotx_noninvolving", non)
        res.add(run.protocol, run.param, "rotx_parked", run.verdict["rotx"]["parked"])
    return res


@dataclass
class Soak:
    runs: int = 1
    M: int = 3
    N: int = 4
    ops: int = 1000
    max_skew: float = 100.0
    link_latency: list = field(default_factory=lambda: [[0, 30, 80], [30, 0, 60], [80, 60, 0]])
    jitter: float = 20.0
    cuts: list = field(default_factory=lambda: [{"start": 50.0, "end": 150.0, "a": 0, "b": 2}])
    keep_traces: bool = True
    protocols: list = field(default_factory=lambda: list(PROTOCOLS))


def soak_config(cfg: Soak, seed: int) -> SimConfig:
    rng = random.Random(f"{seed}:soak-skew")
    skew = {server_addr(m, n): rng.uniform(-cfg.max_skew, cfg.max_skew)
            for m in range(cfg.M) for n in range(cfg.N)}
    return SimConfig(M=cfg.M, N=cfg.N, skew=skew, link_latency=cfg.link_latency, jitter=cfg.jitter,
                     seed=seed, duration=1e9, cuts=[Cut(**c) for c in cfg.cuts])


def soak(cfg: Soak, seed: int, workers: int = 1) -> Result:
    res = Result("soak")
    jobs = [(soak_config(cfg, s), p, _factory(workloads.soak, cfg.M, cfg.N, cfg.ops, s),
             f"soak/{p}/seed={s}", s, cfg.keep_traces)
            for s in range(seed, seed + cfg.runs) for p in cfg.protocols]
    for run in run_all(jobs, workers):
        res.runs.append(run)
        for name, n in run.verdict["counts"].items():
            res.add(run.protocol, run.param, f"violations_{name}", n)
        res.add(run.protocol, run.param, "max_c", run.verdict["max_c"])
        res.add(run.protocol, run.param, "ops", run.verdict["ops"])
    return res


PRESETS = {
    "put-skew": (PutSkew, put_skew),
    "query-amp": (QueryAmp, query_amp),
    "visibility": (Visibility, visibility),
    "rotx-slow": (RotxSlow, rotx_slow),
    "soak": (Soak, soak),
}


def make_config(preset: str, overrides: dict | None = None):
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cls, _ = PRESETS[preset]
    overrides = overrides or {}
    names = {f.name for f in fields(cls)}
    unknown = set(overrides) - names
    if unknown:
        raise ConfigError(f"unknown {preset} fields: {sorted(unknown)}")
    for p in overrides.get("protocols", []):
        by_name(p)
    return cls(**overrides)


def run_preset(preset: str, seed: int = 0, overrides: dict | None = None, workers: int = 1) -> Result:
    cfg = make_config(preset, overrides)
    return PRESETS[preset][1](cfg, seed, workers)


def config_dict(preset: str, overrides: dict | None = None) -> dict:
    return asdict(make_config(preset, overrides))

