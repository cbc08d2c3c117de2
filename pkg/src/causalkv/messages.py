"""Protocol messages for both stores.

Payload fields follow the protocol; ``op``/``txn`` correlate requests with
replies, and ``ver`` fields carry the identity of a returned version so the
offline checker can see exactly what was read.  Clients never look at
``ver``.  Sender, destination and send time live in the network envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any

from .core import Version, VersionRef, ds_to_json, version_to_json
from .hlc import Hlc, encode

msg = dataclass(frozen=True, slots=True)


# -- causally consistent store (HLC + DSV) ----------------------------------

@msg
class GetReq:
    op: str
    k: str
    dsv: tuple


@msg
class GetReply:
    op: str
    v: Any
    ds: dict
    dsv: tuple
    ver: VersionRef | None


@msg
class PutReq:
    op: str
    k: str
    v: Any
    ds: dict


@msg
class PutReply:
    op: str
    ut: Hlc
    sr: int


@msg
class Replicate:
    d: Version


@msg
class Heartbeat:
    hlc: Hlc


@msg
class Rotx:
    op: str
    kset: tuple
    dsv: tuple
    ds: dict


@msg
class RotxReply:
    op: str
    vset: dict  # key -> (value, VersionRef | None)
    dsv: tuple
    ds: dict


@msg
class SliceReq:
    txn: str
    k: str
    sv: tuple


@msg
class SliceReply:
    txn: str
    k: str
    v: Any
    ds: dict
    ver: VersionRef | None


@msg
class DsvShare:
    round: int
    vv: tuple


@msg
class DsvInstall:
    round: int
    dsv: tuple


# -- GentleRain baseline ------------------------------------------------------

@msg
class GrPutReq:
    op: str
    k: str
    v: Any
    dt: Hlc


@msg
class GrPutReply:
    op: str
    ut: Hlc
    sr: int


@msg
class GrGetReq:
    op: str
    k: str
    gst: Hlc


@msg
class GrGetReply:
    op: str
    v: Any
    ut: Hlc
    gst: Hlc
    ver: VersionRef | None


@msg
class GrReplicate:
    d: Version


@msg
class GrHeartbeat:
    ts: Hlc


@msg
class GrGstShare:
    round: int
    ts: Hlc


@msg
class GrGstInstall:
    round: int
    gst: Hlc


@msg
class GrRotx:
    op: str
    kset: tuple
    dt: Hlc
    gst: Hlc


@msg
class GrRotxReply:
    op: str
    vset: dict  # key -> (value, VersionRef | None)
    gst: Hlc
    ut: Hlc  # largest update time among the returned versions


@msg
class GrSliceReq:
    txn: str
    k: str
    snapshot: Hlc


@msg
class GrSliceReply:
    txn: str
    k: str
    v: Any
    ver: VersionRef | None


REPLICATION = (Replicate, Heartbeat, GrReplicate, GrHeartbeat)


def _enc(value: Any) -> Any:
    if isinstance(value, Hlc):
        return encode(value)
    if isinstance(value, Version):
        return version_to_json(value)
    if isinstance(value, VersionRef):
        return value.to_json()
    if isinstance(value, tuple):
        return [_enc(x) for x in value]
    if isinstance(value, dict):
        if all(isinstance(i, int) for i in value):
            return ds_to_json(value)
        return {k: _enc(x) for k, x in sorted(value.items())}
    return value


_FIELDS: dict = {}


def to_json(m: Any) -> dict:
    cls = type(m)
    names = _FIELDS.get(cls)
    if names is None:
        names = _FIELDS[cls] = tuple(f.name for f in fields(cls))
    out = {"type": cls.__name__}
    for name in names:
        out[name] = _enc(getattr(m, name))
    return out
