"""Small scripted executions with a known right answer."""

from __future__ import annotations

from .core import keys_for_partitions
from .simnet import ClientProgram, Get, Put, Rotx, SimConfig, Sleep


def stale_dependency() -> tuple[SimConfig, list[ClientProgram]]:
    """Three replicas A, B, C with two partitions each.  Replication from
    B's partition 1 to A's partition 1 lags by 200 ms; everything else is 10 ms.

    1. at B, a client writes ``y`` (partition 1) and another writes ``x``
       (partition 0) a little later;
    2. at C, a client reads ``y`` and then writes ``z`` (partition 1), so the
       new ``z`` depends on ``y``;
    3. at A, a client reads ``x``, writes ``w`` (partition 1), then reads
       ``z`` and ``y``.

    If the read of ``x`` at step 3 is served before ``x`` is stable at A, the
    client's dependency on ``x`` raises A's partition-1 stable entry for B
    past the lagging ``y``.  The new ``z`` then looks readable at A while
    ``y`` has not arrived, and the last read misses a dependency.
    """
    x = keys_for_partitions(2, 1, "x")[0]
    y, z, w = keys_for_partitions(2, 3, "y")[1::2]
    cfg = SimConfig(M=3, N=2, link_latency=10.0, seed=0, duration=2000.0,
                    pair_delay={"p1.1>p0.1": 200.0})

    def b_writes_y(session):
        yield Sleep(20)
        yield Put(y, "y1")

    def b_writes_x(session):
        yield Sleep(40)
        yield Put(x, "x1")

    def c_copies(session):
        yield Sleep(60)
        v = yield Get(y)
        yield Put(z, f"saw {v}")

    def a_reads(session):
        yield Sleep(90)
        yield Get(x)
        yield Put(w, "w1")
        yield Get(z)
        yield Get(y)

    programs = [
        ClientProgram("b1", 1, b_writes_y),
        ClientProgram("b2", 1, b_writes_x),
        ClientProgram("c1", 2, c_copies),
        ClientProgram("a1", 0, a_reads),
    ]
    return cfg, programs


def profile_privacy(rounds: int = 40, M: int = 2, link: float = 15.0, seed: int = 0):
    """The blocked-friend example.

    Alice blocks Bob and then posts a new photo (change 1); later she puts the
    old photo back and then unblocks him (change 2).  Bob's page, at another
    replica, repeatedly fetches the photo and his status together.  It must
    never see the new photo while still unblocked.
    """
    photo, status = keys_for_partitions(2, 1, "profile")
    cfg = SimConfig(M=M, N=2, link_latency=link, jitter=5.0, seed=seed, duration=5000.0,
                    skew={"p0.0": 3.0, "p1.1": -4.0})

    def alice(session):
        yield Put(status, "unblocked")
        yield Put(photo, "old")
        yield Sleep(30)
        yield Put(status, "blocked")
        yield Put(photo, "new")
        yield Sleep(60)
        yield Put(photo, "old")
        yield Put(status, "unblocked")

    def page(session):
        for _ in range(rounds):
            yield Rotx((photo, status))
            yield Sleep(3)

    programs = [ClientProgram("alice", 0, alice)]
    programs += [ClientProgram(f"bob{m}", m, page) for m in range(M)]
    return cfg, programs, photo, status
