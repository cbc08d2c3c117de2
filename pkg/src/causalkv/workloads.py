"""Client programs for the experiments.

Each factory returns a list of :class:`~causalkv.simnet.ClientProgram`.
Randomness comes from ``random.Random`` seeded by a string, so a workload is a
pure function of its arguments.
"""

from __future__ import annotations

import random

from .core import keys_for_partitions
from .simnet import ClientProgram, Get, Put, Rotx, Sleep


def round_robin_puts(n_partitions: int, n_puts: int, gap: float = 1.0, client: str = "w0",
                     home: int = 0) -> list[ClientProgram]:
    """One client writes partitions 0, 1, ..., N-1, 0, ... in turn.

    Each PUT carries the previous one as a dependency, so with skewed servers
    every other PUT lands on a server whose clock is behind its dependency.
    """
    keys = keys_for_partitions(n_partitions, 1, "rr")

    def body(session):
        for i in range(n_puts):
            yield Put(keys[i % n_partitions], i)
            if gap:
                yield Sleep(gap)

    return [ClientProgram(client, home, body)]


def amplified_requests(n_partitions: int, factor: int, n_requests: int, gap: float = 5.0,
                       home: int = 0, seed: int = 0, start: float = 0.0) -> list[ClientProgram]:
    """End-user requests that each expand into ``factor`` dependent operations.

    Every request runs in its own fresh session and alternates writes and
    reads over keys spread across all partitions, so each operation depends
    on the ones before it in the same request.  Request latency is the span
    from its first operation's start to its last operation's end.  ``start``
    delays the first request, e.g. until every skewed clock reads above zero.
    """
    keys = keys_for_partitions(n_partitions, 4, "amp")
    rng = random.Random(f"{seed}:amp:{factor}")
    programs = []
    for r in range(n_requests):
        plan = []
        for i in range(factor):
            k = rng.choice(keys)
            plan.append(Put(k, f"{r}.{i}") if i % 2 == 0 else Get(k))

        def body(session, plan=plan):
            for op in plan:
                yield op

        programs.append(ClientProgram(f"req{r:04d}", home, body, start=start + r * gap))
    return programs


def collaborative_counter(target: int, a_home: int = 0, b_home: int = 1, poll: float = 0.0,
                          key: str = "counter") -> list[ClientProgram]:
    """Two clients share a counter: one increments on even, the other on odd.

    Each client reads until it sees its parity, then writes the next value.
    The simulator records op-end times; the experiment derives how long each
    new value took to become visible to the other side.
    """

    def player(parity):
        def body(session):
            while True:
                v = yield Get(key)
                v = 0 if v is None else v
                if v >= target:
                    return
                if v % 2 == parity:
                    yield Put(key, v + 1)
                elif poll:
                    yield Sleep(poll)

        return body

    return [ClientProgram("alice", a_home, player(0)), ClientProgram("bob", b_home, player(1))]


def hot_key_rotx_mix(n_partitions: int, n_clients: int, ops_per_client: int, seed: int = 0,
                     hot_keys: int = 3, size: int = 3, gap: float = 1.0, home: int = 0,
                     write_gap: float = 2.0) -> list[ClientProgram]:
    """Readers pick GET or a ``size``-key ROTX with equal odds.

    Keys come from a small hot set on every partition.  One background writer
    per partition keeps that partition's hot keys changing until the last
    reader finishes, so reads carry recent dependencies; a slow partition
    then only slows its own writer.
    """
    keys = keys_for_partitions(n_partitions, hot_keys, "hot")
    rng = random.Random(f"{seed}:hot")
    programs = []
    readers_left = [n_clients]
    for c in range(n_clients):
        plan = []
        for _ in range(ops_per_client):
            if rng.random() < 0.5:
                plan.append(Get(rng.choice(keys)))
            else:
                plan.append(Rotx(tuple(rng.sample(keys, size))))

        def body(session, plan=plan):
            for op in plan:
                yield op
                yield Sleep(gap)
            readers_left[0] -= 1

        programs.append(ClientProgram(f"r{c}", home, body))
    for n in range(n_partitions):
        mine = keys[n::n_partitions]

        def wbody(session, mine=mine, n=n):
            i = 0
            while readers_left[0] > 0:
                yield Put(mine[i % len(mine)], f"w{n}.{i}")
                yield Sleep(write_gap)
                i += 1

        programs.append(ClientProgram(f"w{n}", home, wbody))
    return programs


def soak(M: int, N: int, n_ops: int, seed: int = 0, clients_per_dc: int = 3,
         keys_per_partition: int = 3, rotx_size: int = 3, think: float = 2.0) -> list[ClientProgram]:
    """Randomized mix of GET (40%), PUT (40%) and ROTX (20%) on a small key space."""
    keys = keys_for_partitions(N, keys_per_partition, "s")
    n_clients = M * clients_per_dc
    per = max(1, n_ops // n_clients)
    programs = []
    for c in range(n_clients):
        rng = random.Random(f"{seed}:soak:{c}")
        plan = []
        for i in range(per):
            x = rng.random()
            if x < 0.4:
                plan.append(Get(rng.choice(keys)))
            elif x < 0.8:
                plan.append(Put(rng.choice(keys), f"c{c}.{i}"))
            else:
                plan.append(Rotx(tuple(rng.sample(keys, min(rotx_size, len(keys))))))
            plan.append(Sleep(rng.uniform(0, think)))

        def body(session, plan=plan):
            for op in plan:
                yield op

        programs.append(ClientProgram(f"c{c}", c % M, body, start=rng.uniform(0, think)))
    return programs

