import struct
import threading
from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from intersection_edge.radar import (
    BadMagic,
    Closed,
    EmptyTraces,
    FileSink,
    LatencyTrace,
    ManualClock,
    MemorySink,
    NonzeroReserved,
    OverwriteQueue,
    RadarMessage,
    RadarObject,
    SequenceMonitor,
    SinkFailure,
    TooManyObjects,
    TruncatedMessage,
    UnsupportedVersion,
    WireError,
    broadcast_frame,
    budget_report,
    datagram_size,
    decode,
    nearest_rank,
    read_capture,
    to_radar_objects,
)
from intersection_edge.radar import budget, wire
from intersection_edge.types import ObjClass

i32 = st.integers(-(2**31), 2**31 - 1)
objects = st.builds(RadarObject, st.integers(0, 2**32 - 1), st.sampled_from(list(ObjClass)), i32, i32, i32, i32)
messages = st.builds(RadarMessage, st.integers(0, 2**32 - 1), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1),
                     st.lists(objects, max_size=20).map(tuple))


def _obj(tid=1):
    return RadarObject(tid, ObjClass.VEHICLE, 1000, -2000, 2778, 0)


class TestWire:
    def test_sizes(self):
        assert datagram_size(0) == 28 and datagram_size(2) == 76 and datagram_size(100) == 2428
        assert wire.max_objects_for_mtu(9000) == 373

    def test_header_bytes(self):
        data = wire.encode(RadarMessage(7, 9, 11, (_obj(),)))
        assert data[:4] == b"CRSN" and data[4] == 1 and data[5] == 0
        assert struct.unpack_from("<HIQQ", data, 6) == (1, 7, 9, 11)
        assert data[33:36] == b"\0\0\0" and len(data) == 52

    @given(messages)
    def test_round_trip(self, msg):
        assert decode(wire.encode(msg)) == msg

    def test_errors(self):
        good = wire.encode(RadarMessage(1, 1, 1, (_obj(),)))
        with pytest.raises(TruncatedMessage):
            decode(good[:27])
        with pytest.raises(TruncatedMessage):
            decode(good[:-1])
        with pytest.raises(TruncatedMessage):
            decode(good + b"\0")
        with pytest.raises(BadMagic):
            decode(b"X" + good[1:])
        with pytest.raises(UnsupportedVersion):
            decode(good[:4] + b"\x02" + good[5:])
        with pytest.raises(NonzeroReserved):
            decode(good[:5] + b"\x01" + good[6:])
        with pytest.raises(NonzeroReserved):
            decode(good[:34] + b"\x01" + good[35:])
        with pytest.raises(WireError):
            decode(good[:32] + b"\x09" + good[33:])

    def test_too_many(self):
        with pytest.raises(TooManyObjects):
            wire.encode(RadarMessage(1, 1, 1, (_obj(),) * 65536))

    def test_sequence_monitor(self):
        m = SequenceMonitor()
        assert m.observe(RadarMessage(1, 5, 0)) == 0
        assert m.observe(RadarMessage(1, 8, 0)) == 2 and m.missing == 2
        with pytest.raises(WireError):
            m.observe(RadarMessage(1, 8, 0))


def _snap(tid, pos, vel, cls=ObjClass.VEHICLE):
    return SimpleNamespace(track_id=tid, cls=cls, world_pos=pos, world_vel=vel)


class TestBroadcast:
    def test_heartbeat(self):
        sink, clock = MemorySink(), ManualClock(100)
        tr = broadcast_frame([], clock, sink, LatencyTrace(3, 50))
        assert len(sink.datagrams[0]) == 28 and not tr.dropped
        msg = decode(sink.datagrams[0])
        assert msg.objects == () and msg.frame_seq == 3 and msg.capture_ts_us == 50

    def test_mm_conversion(self):
        (o,) = to_radar_objects([_snap(4, (1.0005, -3.2), (2.778, -0.0009))])
        assert (o.x_mm, o.y_mm, o.vx_mm_s, o.vy_mm_s) == (1000, -3200, 2778, 0)

    def test_speed_clamp(self):
        (o,) = to_radar_objects([_snap(1, (0, 0), (100.0, 0.0))])
        assert o.vx_mm_s == wire.SPEED_LIMIT_MM_S

    def test_sink_failure_drops(self):
        class Broken:
            def send(self, data):
                raise SinkFailure("full")

        tr = broadcast_frame([], ManualClock(), Broken(), LatencyTrace(0, 0))
        assert tr.dropped and "sink failure" in tr.note

    def test_mtu_cap_drops(self):
        sink = MemorySink()
        snaps = [_snap(i, (0, 0), (0, 0)) for i in range(374)]
        tr = broadcast_frame(snaps, ManualClock(), sink, LatencyTrace(0, 0))
        assert tr.dropped and sink.datagrams == []

    def test_capture_file(self, tmp_path):
        p = tmp_path / "c.bin"
        sink = FileSink(p)
        msgs = [wire.encode(RadarMessage(1, k, k, (_obj(k),) * k)) for k in range(4)]
        for m in msgs:
            sink.send(m)
        sink.close()
        assert list(read_capture(p)) == msgs
        p.write_bytes(p.read_bytes()[:-1])
        with pytest.raises(ValueError):
            list(read_capture(p))

    def test_closed_file_sink_fails(self, tmp_path):
        sink = FileSink(tmp_path / "c.bin")
        sink.close()
        with pytest.raises(SinkFailure):
            sink.send(b"x")


def _trace(e2e, seq=0):
    return LatencyTrace(seq, 0, 1, 2, 3, 4, e2e)


class TestBudget:
    def test_within(self):
        assert budget_report([_trace(30000)]).violation_rate == 0.0

    def test_over_by_one(self):
        assert budget_report([_trace(33334)]).violation_rate == 1.0
        assert budget_report([_trace(33333)]).violation_rate == 0.0

    def test_p99_nearest_rank(self):
        rep = budget_report([_trace(20000, k) for k in range(9)] + [_trace(40000, 9)])
        assert rep.violation_rate == pytest.approx(0.1) and rep.end_to_end[1] == 40000

    def test_nearest_rank(self):
        v = list(range(1, 101))
        assert nearest_rank(v, 50) == 50 and nearest_rank(v, 99) == 99 and nearest_rank([7], 99) == 7

    def test_empty(self):
        with pytest.raises(EmptyTraces):
            budget_report([])

    def test_csv(self, tmp_path):
        rep = budget_report([_trace(20000)])
        budget.write_budget_csv(tmp_path / "b.csv", rep)
        lines = (tmp_path / "b.csv").read_text().splitlines()
        assert lines[0] == "stage,p50_us,p99_us" and lines[-2] == "end_to_end,20000,20000"

    def test_trace_valid(self):
        assert _trace(10).valid() and not LatencyTrace(0, 5, 4).valid()


class TestQueue:
    def test_overwrite(self):
        dropped = []
        q = OverwriteQueue(2, dropped.append)
        for k in range(5):
            q.put(k)
        assert q.overwritten == 3 and dropped == [0, 1, 2] and [q.get(), q.get()] == [3, 4]

    def test_close(self):
        q = OverwriteQueue(1)
        q.put(1)
        q.close()
        assert q.get() == 1
        with pytest.raises(Closed):
            q.get()
        with pytest.raises(Closed):
            q.put(2)

    def test_timeout(self):
        with pytest.raises(TimeoutError):
            OverwriteQueue(1).get(timeout=0.01)

    def test_threads(self):
        q, got = OverwriteQueue(4), []

        def consume():
            try:
                while True:
                    got.append(q.get())
            except Closed:
                pass

        th = threading.Thread(target=consume)
        th.start()
        for k in range(1000):
            q.put(k)
        q.close()
        th.join()
        assert len(got) + q.overwritten == 1000 and got == sorted(got)

    def test_bad_depth(self):
        with pytest.raises(ValueError):
            OverwriteQueue(0)
