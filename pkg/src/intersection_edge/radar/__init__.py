"""Radar-screen broadcast: wire format, sinks and latency-budget accounting."""

from .broadcast import (
    DEFAULT_GROUP,
    DEFAULT_MTU,
    DEFAULT_PORT,
    FileSink,
    LatencyTrace,
    ManualClock,
    MemorySink,
    MonotonicClock,
    SinkFailure,
    UdpSink,
    broadcast_frame,
    read_capture,
    to_radar_objects,
)
from .budget import BUDGET_US, BudgetReport, Closed, EmptyTraces, OverwriteQueue, budget_report, nearest_rank
from .wire import (
    BadMagic,
    NonzeroReserved,
    RadarMessage,
    RadarObject,
    SequenceMonitor,
    TooManyObjects,
    TruncatedMessage,
    UnsupportedVersion,
    WireError,
    datagram_size,
    decode,
    encode,
    max_objects_for_mtu,
)

__all__ = [
    "BUDGET_US",
    "BadMagic",
    "BudgetReport",
    "Closed",
    "DEFAULT_GROUP",
    "DEFAULT_MTU",
    "DEFAULT_PORT",
    "EmptyTraces",
    "FileSink",
    "LatencyTrace",
    "ManualClock",
    "MemorySink",
    "MonotonicClock",
    "NonzeroReserved",
    "OverwriteQueue",
    "RadarMessage",
    "RadarObject",
    "SequenceMonitor",
    "SinkFailure",
    "TooManyObjects",
    "TruncatedMessage",
    "UdpSink",
    "UnsupportedVersion",
    "WireError",
    "broadcast_frame",
    "budget_report",
    "datagram_size",
    "decode",
    "encode",
    "max_objects_for_mtu",
    "nearest_rank",
    "read_capture",
    "to_radar_objects",
]
