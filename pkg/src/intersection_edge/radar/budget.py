"""Latency-budget statistics and the freshest-wins stage queue."""

from __future__ import annotations

import csv
import math
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .broadcast import LatencyTrace

BUDGET_US = 33333  # 1/30 s


class EmptyTraces(ValueError):
    pass


def nearest_rank(values, q: float) -> float:
    """q-th percentile by nearest rank: the ceil(q/100 * n)-th smallest value."""
    v = np.sort(np.asarray(values))
    if len(v) == 0:
        raise EmptyTraces("no samples")
    k = max(1, math.ceil(round(q / 100.0 * len(v), 9)))
    return float(v[k - 1])


@dataclass(frozen=True)
class BudgetReport:
    n: int
    budget_us: int
    stages: dict  # name -> (p50, p99)
    end_to_end: tuple[float, float]
    violation_rate: float
    dropped: int

    def rows(self) -> list[tuple[str, float, float]]:
        return [(k, *v) for k, v in self.stages.items()] + [("end_to_end", *self.end_to_end)]


def budget_report(traces: Sequence[LatencyTrace], budget_us: int = BUDGET_US) -> BudgetReport:
    """Per-stage and end-to-end p50/p99; a frame violates iff end-to-end > budget."""
    if not traces:
        raise EmptyTraces("budget_report needs at least one trace")
    d = np.array([t.deltas() for t in traces], dtype=np.int64)
    e2e = np.array([t.end_to_end for t in traces], dtype=np.int64)
    stages = {name: (nearest_rank(d[:, k], 50), nearest_rank(d[:, k], 99)) for k, name in enumerate(LatencyTrace.STAGES)}
    return BudgetReport(
        len(traces), budget_us, stages, (nearest_rank(e2e, 50), nearest_rank(e2e, 99)),
        float(np.mean(e2e > budget_us)), sum(t.dropped for t in traces),
    )


def write_budget_csv(path: str | Path, rep: BudgetReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "p50_us", "p99_us"])
        for name, p50, p99 in rep.rows():
            w.writerow([name, f"{p50:.0f}", f"{p99:.0f}"])
        w.writerow(["violation_rate", f"{rep.violation_rate:.6f}", ""])


def write_traces_csv(path: str | Path, traces: Sequence[LatencyTrace]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_seq", "t_acquire", "t_detect_done", "t_track_done", "t_analyze_done",
                    "t_encode_done", "t_broadcast_done", "dropped"])
        for t in traces:
            w.writerow([t.frame_seq, *t.stamps(), int(t.dropped)])


class Closed(Exception):
    pass


class OverwriteQueue:
    """Bounded single-producer/single-consumer queue that never blocks the producer.

    When full, ``put`` discards the oldest item (freshest data wins) and
    counts it in ``overwritten``.
    """

    def __init__(self, depth: int = 2, on_drop=None):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self._items: deque = deque()
        self.depth = depth
        self._cv = threading.Condition()
        self._closed = False
        self.overwritten = 0
        self._on_drop = on_drop

    def put(self, item) -> None:
        with self._cv:
            if self._closed:
                raise Closed()
            if len(self._items) >= self.depth:
                stale = self._items.popleft()
                self.overwritten += 1
                if self._on_drop is not None:
                    self._on_drop(stale)
            self._items.append(item)
            self._cv.notify()

    def get(self, timeout: float | None = None):
        """Oldest queued item; raises :class:`Closed` once closed and drained."""
        with self._cv:
            while not self._items:
                if self._closed:
                    raise Closed()
                if not self._cv.wait(timeout):
                    raise TimeoutError()
            return self._items.popleft()

    def close(self) -> None:
        with self._cv:
            self._closed = True
            self._cv.notify_all()

    def __len__(self) -> int:
        with self._cv:
            return len(self._items)
