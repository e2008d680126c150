"""Bit-exact little-endian datagram for per-frame track snapshots.

Header (28 bytes): magic "CRSN", version u8, flags u8 (0), object_count u16,
intersection_id u32, frame_seq u64, capture_ts_us u64. Then 24 bytes per
object: track_id u32, class u8, 3 zero bytes, x_mm, y_mm, vx_mm_s, vy_mm_s
as i32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from ..types import ObjClass

MAGIC = b"CRSN"
VERSION = 1
HEADER = struct.Struct("<4sBBHIQQ")
OBJECT = struct.Struct("<IB3siiii")
HEADER_SIZE = HEADER.size  # 28
OBJECT_SIZE = OBJECT.size  # 24
MAX_OBJECTS = 0xFFFF
POS_LIMIT_MM = 10**7
SPEED_LIMIT_MM_S = int(27780 * 1.5)

assert HEADER_SIZE == 28 and OBJECT_SIZE == 24


class WireError(ValueError):
    pass


class TooManyObjects(WireError):
    pass


class BadMagic(WireError):
    pass


class TruncatedMessage(WireError):
    pass


class UnsupportedVersion(WireError):
    pass


class NonzeroReserved(WireError):
    pass


@dataclass(frozen=True, slots=True)
class RadarObject:
    track_id: int
    cls: ObjClass
    x_mm: int
    y_mm: int
    vx_mm_s: int
    vy_mm_s: int


@dataclass(frozen=True)
class RadarMessage:
    intersection_id: int
    frame_seq: int
    capture_ts_us: int
    objects: tuple = field(default_factory=tuple)
    version: int = VERSION


def datagram_size(n_objects: int) -> int:
    return HEADER_SIZE + OBJECT_SIZE * n_objects


def max_objects_for_mtu(mtu: int) -> int:
    return min(MAX_OBJECTS, (mtu - HEADER_SIZE) // OBJECT_SIZE)


def encode(msg: RadarMessage) -> bytes:
    n = len(msg.objects)
    if n > MAX_OBJECTS:
        raise TooManyObjects(f"{n} objects exceed {MAX_OBJECTS}")
    parts = [HEADER.pack(MAGIC, msg.version, 0, n, msg.intersection_id, msg.frame_seq, msg.capture_ts_us)]
    zero = b"\0\0\0"
    for o in msg.objects:
        parts.append(OBJECT.pack(o.track_id, int(o.cls), zero, o.x_mm, o.y_mm, o.vx_mm_s, o.vy_mm_s))
    return b"".join(parts)


def decode(data: bytes) -> RadarMessage:
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise TruncatedMessage(f"{len(data)} bytes is shorter than the header")
    magic, version, flags, n, iid, seq, ts = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BadMagic(f"magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    if flags != 0:
        raise NonzeroReserved(f"header flags {flags:#x}")
    if len(data) != datagram_size(n):
        raise TruncatedMessage(f"{len(data)} bytes for {n} objects (expected {datagram_size(n)})")
    objs = []
    for k in range(n):
        tid, c, res, x, y, vx, vy = OBJECT.unpack_from(data, HEADER_SIZE + k * OBJECT_SIZE)
        if res != b"\0\0\0":
            raise NonzeroReserved(f"object {k} reserved bytes {res!r}")
        if c > ObjClass.OTHER:
            raise WireError(f"object {k} has unknown class code {c}")
        objs.append(RadarObject(tid, ObjClass(c), x, y, vx, vy))
    return RadarMessage(iid, seq, ts, tuple(objs), version)


class SequenceMonitor:
    """Receiver-side frame_seq check: gaps are reported, regressions rejected."""

    def __init__(self):
        self.last: int | None = None
        self.missing = 0

    def observe(self, msg: RadarMessage) -> int:
        """Returns the number of frames skipped since the previous message."""
        gap = 0
        if self.last is not None:
            if msg.frame_seq <= self.last:
                raise WireError(f"frame_seq {msg.frame_seq} not after {self.last}")
            gap = msg.frame_seq - self.last - 1
        self.last = msg.frame_seq
        self.missing += gap
        return gap
