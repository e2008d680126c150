"""Real-time replay: paced acquisition, emulated detector, tracker, analytics
and broadcast running as threads joined by freshest-wins queues."""

from __future__ import annotations

import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .. import analytics
from ..detemu import LatencyModel, NoiseProfile, emulate, inference_latency
from ..geometry import Homography, SceneMask
from ..radar import Closed, LatencyTrace, MonotonicClock, OverwriteQueue, broadcast_frame
from ..tracker import Tracker, TrackerConfig
from ..types import ObjClass


@dataclass
class ReplayResult:
    traces: list[LatencyTrace]
    frames_in: int
    overwritten: dict[str, int]
    events: list = field(default_factory=list)
    error: BaseException | None = None

    @property
    def completed(self) -> int:
        return len(self.traces)


def _sleep_until(clock: MonotonicClock, t_us: int) -> None:
    while True:
        rem = t_us - clock.now_us()
        if rem <= 0:
            return
        time.sleep(rem / 1e6 if rem > 2000 else rem / 2e6)


def replay(frame_truth: Sequence[Sequence], frame_rate: float, profile: NoiseProfile, seed: int,
           latency: LatencyModel, tracker_cfg: TrackerConfig, px_to_world: Homography | None,
           sink, frame_dims=(832, 832), mask: SceneMask | None = None, threshold_m: float = 2.0,
           intersection_id: int = 1, mtu: int = 9000, depth: int = 2,
           emulate_latency: bool = True, clock: MonotonicClock | None = None,
           on_trace: Callable[[LatencyTrace], None] | None = None) -> ReplayResult:
    """Push ``frame_truth`` through the live stage chain at ``frame_rate``.

    The detector stage holds each frame for the latency model's inference
    time (counted from when it picked the frame up). Queues between stages
    keep at most ``depth`` frames and overwrite the stalest when full.
    """
    clock = clock or MonotonicClock()
    period_us = 1e6 / frame_rate
    names = ("detect", "track", "analyze", "broadcast")
    queues = {n: OverwriteQueue(depth) for n in names}
    traces: list[LatencyTrace] = []
    errors: list[BaseException] = []
    tracker = Tracker(tracker_cfg, px_to_world, frame_rate)
    events = analytics.EventBuilder()

    def worker(name, fn, out):
        q = queues[name]
        try:
            while True:
                try:
                    item = q.get()
                except Closed:
                    break
                res = fn(item)
                if out is not None:
                    try:
                        queues[out].put(res)
                    except Closed:
                        break
        except BaseException as e:  # surface stage failures to the caller
            errors.append(e)
            for qq in queues.values():
                qq.close()
        finally:
            if out is not None:
                queues[out].close()

    def detect(item):
        f, trace = item
        t0 = clock.now_us()
        dets = emulate(frame_truth[f], profile, seed, f, frame_dims, mask)
        if emulate_latency:
            _sleep_until(clock, t0 + int(inference_latency(latency, len(dets))))
        trace.t_detect_done = clock.now_us()
        return f, trace, dets

    def track(item):
        f, trace, dets = item
        snaps = tracker.step(f, dets)
        trace.t_track_done = clock.now_us()
        return f, trace, snaps

    def analyze(item):
        f, trace, snaps = item
        ped = {s.track_id: s.world_pos for s in snaps if s.cls == ObjClass.PEDESTRIAN}
        flags = analytics.pairwise_violations([(f, ped)], threshold_m)
        events.feed(flags)
        events.flush(now=f)
        trace.t_analyze_done = clock.now_us()
        return f, trace, snaps

    def send(item):
        f, trace, snaps = item
        broadcast_frame(snaps, clock, sink, trace, intersection_id, mtu)
        traces.append(trace)
        if on_trace is not None:
            on_trace(trace)

    chain = [("detect", detect, "track"), ("track", track, "analyze"),
             ("analyze", analyze, "broadcast"), ("broadcast", send, None)]
    threads = [threading.Thread(target=worker, args=c, name=f"stage-{c[0]}", daemon=True) for c in chain]
    # short GIL slices so a stage waking from its emulated inference is not held
    # behind another stage's Python work for the default 5 ms
    old_switch = sys.getswitchinterval()
    sys.setswitchinterval(2e-4)
    for t in threads:
        t.start()
    start = clock.now_us()
    n_in = 0
    try:
        for f in range(len(frame_truth)):
            if errors:
                break
            _sleep_until(clock, start + int(round(f * period_us)))
            trace = LatencyTrace(frame_seq=f, t_acquire=clock.now_us())
            try:
                queues["detect"].put((f, trace))
            except Closed:
                break
            n_in += 1
    finally:
        queues["detect"].close()
        for t in threads:
            t.join()
        sys.setswitchinterval(old_switch)
    return ReplayResult(traces, n_in, {n: q.overwritten for n, q in queues.items()},
                        events.events(), errors[0] if errors else None)
