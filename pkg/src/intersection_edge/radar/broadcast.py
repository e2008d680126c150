"""Datagram sinks, the pipeline clock and per-frame broadcast."""

from __future__ import annotations

import math
import socket
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .wire import (
    POS_LIMIT_MM,
    SPEED_LIMIT_MM_S,
    RadarMessage,
    RadarObject,
    encode,
    max_objects_for_mtu,
)

DEFAULT_GROUP = "239.0.0.120"
DEFAULT_PORT = 12120
DEFAULT_MTU = 9000
LENGTH = struct.Struct("<I")


class SinkFailure(OSError):
    pass


class MonotonicClock:
    """Microseconds since construction on the monotonic clock."""

    def __init__(self):
        self._origin = time.monotonic_ns()

    def now_us(self) -> int:
        return (time.monotonic_ns() - self._origin) // 1000


class ManualClock:
    def __init__(self, start_us: int = 0):
        self.t = start_us

    def now_us(self) -> int:
        return self.t

    def advance(self, us: int) -> None:
        self.t += us


class MemorySink:
    def __init__(self):
        self.datagrams: list[bytes] = []

    def send(self, data: bytes) -> None:
        self.datagrams.append(bytes(data))

    def close(self) -> None:
        pass


class FileSink:
    """Capture file of u32 little-endian length-prefixed datagrams."""

    def __init__(self, path: str | Path):
        self._fh = open(path, "wb")
        self._lock = threading.Lock()

    def send(self, data: bytes) -> None:
        with self._lock:
            try:
                self._fh.write(LENGTH.pack(len(data)) + data)
            except (OSError, ValueError) as e:
                raise SinkFailure(str(e)) from e

    def close(self) -> None:
        self._fh.close()


def read_capture(path: str | Path) -> Iterator[bytes]:
    data = Path(path).read_bytes()
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError("capture file ends inside a length prefix")
        (n,) = LENGTH.unpack_from(data, pos)
        pos += 4
        if pos + n > len(data):
            raise ValueError("capture file ends inside a record")
        yield data[pos:pos + n]
        pos += n


class UdpSink:
    """Non-blocking UDP sender; a full socket buffer drops the frame."""

    def __init__(self, group: str = DEFAULT_GROUP, port: int = DEFAULT_PORT, ttl: int = 1, loopback: bool = True):
        self.addr = (group, port)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
        self.sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, ttl)
        self.sock.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1 if loopback else 0)
        self.sock.setblocking(False)

    def send(self, data: bytes) -> None:
        try:
            self.sock.sendto(data, self.addr)
        except OSError as e:
            raise SinkFailure(str(e)) from e

    def close(self) -> None:
        self.sock.close()


@dataclass
class LatencyTrace:
    frame_seq: int
    t_acquire: int
    t_detect_done: int = 0
    t_track_done: int = 0
    t_analyze_done: int = 0
    t_encode_done: int = 0
    t_broadcast_done: int = 0
    dropped: bool = False
    note: str = ""

    STAGES = ("detect", "track", "analyze", "encode", "broadcast")

    def stamps(self) -> tuple[int, ...]:
        return (self.t_acquire, self.t_detect_done, self.t_track_done, self.t_analyze_done,
                self.t_encode_done, self.t_broadcast_done)

    def deltas(self) -> tuple[int, ...]:
        s = self.stamps()
        return tuple(b - a for a, b in zip(s, s[1:]))

    @property
    def end_to_end(self) -> int:
        return self.t_broadcast_done - self.t_acquire

    def valid(self) -> bool:
        s = self.stamps()
        return all(a <= b for a, b in zip(s, s[1:]))


def _mm(v: float) -> int:
    # truncate toward zero after absorbing binary rounding (2.778 m -> 2778 mm)
    return math.trunc(round(v * 1000.0, 6))


def to_radar_objects(tracks: Sequence) -> list[RadarObject]:
    """World-space snapshots -> wire objects (metres to mm, clamped to the wire bounds)."""
    out = []
    for t in tracks:
        x = max(-POS_LIMIT_MM + 1, min(POS_LIMIT_MM - 1, _mm(t.world_pos[0])))
        y = max(-POS_LIMIT_MM + 1, min(POS_LIMIT_MM - 1, _mm(t.world_pos[1])))
        vx, vy = _mm(t.world_vel[0]), _mm(t.world_vel[1])
        sp = math.hypot(vx, vy)
        if sp > SPEED_LIMIT_MM_S:
            k = SPEED_LIMIT_MM_S / sp
            vx, vy = math.trunc(vx * k), math.trunc(vy * k)
        out.append(RadarObject(int(t.track_id), t.cls, x, y, vx, vy))
    return out


def broadcast_frame(tracks: Sequence, clock, sink, trace: LatencyTrace, intersection_id: int = 1,
                    mtu: int = DEFAULT_MTU) -> LatencyTrace:
    """Encode one frame of tracks and hand it to ``sink``.

    An empty list still produces a header-only heartbeat. Sink errors and
    frames too large for one datagram mark the trace dropped instead of
    raising.
    """
    objs = to_radar_objects(tracks)
    if len(objs) > max_objects_for_mtu(mtu):
        trace.t_encode_done = trace.t_broadcast_done = clock.now_us()
        trace.dropped, trace.note = True, f"{len(objs)} objects exceed the MTU cap"
        return trace
    data = encode(RadarMessage(intersection_id, trace.frame_seq, trace.t_acquire, tuple(objs)))
    trace.t_encode_done = clock.now_us()
    try:
        sink.send(data)
    except SinkFailure as e:
        trace.dropped, trace.note = True, f"sink failure: {e}"
    trace.t_broadcast_done = clock.now_us()
    return trace
