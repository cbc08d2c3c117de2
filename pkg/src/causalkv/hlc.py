"""Hybrid logical clock timestamps.

A timestamp is a pair ``(l, c)``: ``l`` tracks the largest physical reading
seen (in 1 ms ticks) and ``c`` is a bounded counter that orders events sharing
the same ``l``.  Timestamps are plain named tuples, so the built-in tuple
comparison is already the lexicographic order the clock needs.

All update rules are pure: they take the current value and return the next.
"""

from __future__ import annotations

from typing import NamedTuple

L_BITS = 48
C_BITS = 16
L_LIMIT = 1 << L_BITS
C_LIMIT = 1 << C_BITS


class HlcOverflow(ValueError):
    """A timestamp no longer fits the 48/16-bit encoding."""


class Hlc(NamedTuple):
    l: int
    c: int = 0

    def __str__(self) -> str:
        return f"<{self.l},{self.c}>"


ZERO = Hlc(0, 0)


def _checked(t: Hlc) -> Hlc:
    if t.c >= C_LIMIT or t.l >= L_LIMIT:
        raise HlcOverflow(f"timestamp {t} exceeds the {L_BITS}/{C_BITS}-bit layout")
    return t


def tick_local(current: Hlc, pt: int) -> Hlc:
    """Send or local event."""
    l = max(current.l, pt)
    c = current.c + 1 if l == current.l else 0
    return _checked(Hlc(l, c))


def tick_recv(current: Hlc, msg: Hlc, pt: int) -> Hlc:
    """Receipt of a message stamped ``msg``."""
    l = max(current.l, msg.l, pt)
    if l == current.l == msg.l:
        c = max(current.c, msg.c) + 1
    elif l == current.l:
        c = current.c + 1
    elif l == msg.l:
        c = msg.c + 1
    else:
        c = 0
    return _checked(Hlc(l, c))


def tick_put(current: Hlc, dt: Hlc, pt: int) -> Hlc:
    """Timestamp for a new version that must dominate its dependency time ``dt``.

    Same case split as :func:`tick_recv` with ``dt`` in the role of the
    message; the result is strictly greater than both ``current`` and ``dt``,
    whatever the physical reading, so a PUT never has to wait for the clock.
    """
    return tick_recv(current, dt, pt)


def compare(a: Hlc, b: Hlc) -> int:
    """-1, 0 or 1 as ``a`` is less than, equal to or greater than ``b``."""
    return (a > b) - (a < b)


def encode(t: Hlc) -> int:
    if t.l < 0 or t.c < 0:
        raise HlcOverflow(f"negative component in {t}")
    _checked(t)
    return (t.l << C_BITS) | t.c


def decode(word: int) -> Hlc:
    if not 0 <= word < 1 << (L_BITS + C_BITS):
        raise HlcOverflow(f"{word} is not a 64-bit encoded timestamp")
    return Hlc(word >> C_BITS, word & (C_LIMIT - 1))


def to_bytes(t: Hlc) -> bytes:
    return encode(t).to_bytes(8, "big")


def from_bytes(raw: bytes) -> Hlc:
    if len(raw) != 8:
        raise HlcOverflow(f"expected 8 bytes, got {len(raw)}")
    return decode(int.from_bytes(raw, "big"))
