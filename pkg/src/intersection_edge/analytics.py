"""Turn counting, social-distancing violations with group validation, and
violation-duration statistics over world-space tracks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .scenesim.layout import ARMS, MOVEMENTS, TURN_TABLE, Layout

INCOMPLETE = "incomplete"


class InsufficientOverlap(ValueError):
    pass


# -- turn counting ---------------------------------------------------------------


def classify_turn(history: Sequence, layout: Layout | None = None, early: int = 15) -> str:
    """Movement of a track from its world-position history.

    ``history`` holds ``(x, y)`` points or ``(frame, (x, y))`` pairs. The entry
    arm is the first arm among the first ``early`` points, the track must
    pass through the intersection box, and the exit arm is the arm of the
    last point; anything else is ``"incomplete"``.
    """
    layout = layout or Layout()
    pts = _points(history)
    if not pts:
        return INCOMPLETE
    entry = None
    k_entry = 0
    for k, (x, y) in enumerate(pts[:early]):
        a = layout.arm_of(x, y)
        if a is not None:
            entry, k_entry = a, k
            break
    if entry is None:
        return INCOMPLETE
    k_box = next((k for k in range(k_entry, len(pts)) if layout.in_box(*pts[k])), None)
    if k_box is None:
        return INCOMPLETE
    exit_ = layout.arm_of(*pts[-1])
    if exit_ is None:
        return INCOMPLETE
    return TURN_TABLE[(entry, exit_)]


def _points(history) -> list:
    # accept bare (x, y) points or (frame, (x, y)) pairs
    return [tuple(p[1]) if np.ndim(p[1]) == 1 else tuple(p) for p in history]


def _entry_exit(history, layout: Layout, early: int = 15):
    pts = _points(history)
    entry = next((layout.arm_of(*p) for p in pts[:early] if layout.arm_of(*p)), None)
    return entry, layout.arm_of(*pts[-1]) if pts else None


@dataclass
class TurnCount:
    counts: dict = field(default_factory=lambda: {(a, m): 0 for a in ARMS for m in MOVEMENTS})

    def add(self, entry: str, movement: str, n: int = 1) -> None:
        if n < 0:
            raise ValueError("counters never decrease")
        self.counts[(entry, movement)] += n

    def total(self) -> int:
        return sum(self.counts.values())

    def table(self) -> list[list]:
        return [[a] + [self.counts[(a, m)] for m in MOVEMENTS] for a in ARMS]


def count_turns(histories: Iterable[Sequence], layout: Layout | None = None) -> TurnCount:
    layout = layout or Layout()
    tc = TurnCount()
    for h in histories:
        label = classify_turn(h, layout)
        if label != INCOMPLETE:
            entry, _ = _entry_exit(h, layout)
            tc.add(entry, label)
    return tc


def counting_accuracy(pred: TurnCount, truth: TurnCount) -> float:
    """1 - sum |pred - truth| / sum truth over the (entry arm, movement) table."""
    tot = truth.total()
    if tot == 0:
        return 1.0 if pred.total() == 0 else 0.0
    err = sum(abs(pred.counts[k] - truth.counts[k]) for k in truth.counts)
    return 1.0 - err / tot


# -- social distancing ---------------------------------------------------------------


@dataclass(frozen=True)
class ViolationEvent:
    pair: tuple[int, int]
    start_frame: int
    end_frame: int
    min_distance: float

    def __post_init__(self):
        if self.pair[0] >= self.pair[1] or self.end_frame < self.start_frame:
            raise ValueError(f"malformed event {self}")

    def duration(self, frame_rate: float) -> float:
        return (self.end_frame - self.start_frame + 1) / frame_rate


@dataclass(frozen=True)
class GroupLabel:
    pair: tuple[int, int]
    is_safe_group: bool
    mean_distance: float
    distance_std: float
    velocity_cosine: float


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def pairwise_violations(frames: Iterable, threshold_m: float = 2.0) -> list[tuple[int, int, int, float]]:
    """Raw ``(frame, id_a, id_b, distance)`` flags, ``id_a < id_b``, strict ``<``.

    ``frames`` yields ``(frame_index, {track_id: (x, y)})``.
    """
    out = []
    for f, pos in frames:
        ids = sorted(pos)
        if len(ids) < 2:
            continue
        p = np.array([pos[i] for i in ids], dtype=float)
        d = np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(-1))
        ii, jj = np.nonzero(np.triu(d < threshold_m, k=1))
        out.extend((int(f), ids[i], ids[j], float(d[i, j])) for i, j in zip(ii, jj))
    return out


def _unit(v) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.where(n > 1e-9, v / np.maximum(n, 1e-12), 0.0)


def pair_windows(a: Mapping, b: Mapping, window: int):
    """Co-visible frames of two tracks and the distance/velocity-cosine series.

    ``a`` and ``b`` map frame -> ((x, y), (vx, vy)).
    """
    common = sorted(set(a) & set(b))
    if len(common) < window:
        raise InsufficientOverlap(f"{len(common)} co-visible frames < {window}")
    pa = np.array([a[f][0] for f in common])
    pb = np.array([b[f][0] for f in common])
    va = _unit(np.array([a[f][1] for f in common]))
    vb = _unit(np.array([b[f][1] for f in common]))
    dist = np.linalg.norm(pa - pb, axis=1)
    cos = (va * vb).sum(1)
    return np.array(common), dist, cos


def _rolling(x: np.ndarray, w: int) -> tuple[np.ndarray, np.ndarray]:
    c1 = np.concatenate([[0.0], np.cumsum(x)])
    c2 = np.concatenate([[0.0], np.cumsum(x * x)])
    mean = (c1[w:] - c1[:-w]) / w
    var = np.maximum((c2[w:] - c2[:-w]) / w - mean**2, 0.0)
    return mean, np.sqrt(var)


def group_label(pair, a: Mapping, b: Mapping, window: int = 30, d_group: float = 1.5,
                sigma_max: float = 0.4, cos_min: float = 0.9):
    """Label one pair; also returns the frames covered by qualifying windows."""
    frames, dist, cos = pair_windows(a, b, window)
    m, s = _rolling(dist, window)
    c, _ = _rolling(cos, window)
    ok = (m <= d_group) & (s <= sigma_max) & (c >= cos_min)
    covered = set()
    for k in np.flatnonzero(ok):
        covered.update(int(f) for f in frames[k:k + window])
    if ok.any():
        k = int(np.flatnonzero(ok)[0])
    else:
        k = int(np.argmin(m))
    label = GroupLabel(_pair(*pair), bool(ok.any()), float(m[k]), float(s[k]), float(c[k]))
    return label, covered


def validate_groups(raw: Sequence, tracks: Mapping[int, Mapping], window: int = 30, d_group: float = 1.5,
                    sigma_max: float = 0.4, cos_min: float = 0.9):
    """Group labels for every flagged pair and the raw flags that survive.

    ``tracks`` maps track id -> {frame: ((x, y), (vx, vy))}. A pair seen
    together for fewer than ``window`` frames is never a safe group.
    Returns ``(labels, kept)`` where ``kept`` is a subset of ``raw``.
    """
    labels: dict[tuple[int, int], GroupLabel] = {}
    covered: dict[tuple[int, int], set] = {}
    for p in sorted({_pair(r[1], r[2]) for r in raw}):
        try:
            lab, cov = group_label(p, tracks[p[0]], tracks[p[1]], window, d_group, sigma_max, cos_min)
        except InsufficientOverlap:
            lab, cov = GroupLabel(p, False, math.nan, math.nan, math.nan), set()
        labels[p] = lab
        covered[p] = cov if lab.is_safe_group else set()
    kept = [r for r in raw if r[0] not in covered[_pair(r[1], r[2])]]
    return labels, kept


class EventBuilder:
    """Streams raw flags into closed :class:`ViolationEvent` s.

    Runs of flagged frames for one pair merge when separated by at most
    ``max_gap`` unflagged frames.
    """

    def __init__(self, max_gap: int = 2):
        self.max_gap = max_gap
        self._open: dict[tuple[int, int], list] = {}
        self.closed: list[ViolationEvent] = []

    def feed(self, flags: Iterable[tuple[int, int, int, float]]) -> None:
        for f, a, b, d in sorted(flags, key=lambda r: (r[0], _pair(r[1], r[2]))):
            p = _pair(a, b)
            cur = self._open.get(p)
            if cur is not None and f - cur[1] - 1 <= self.max_gap:
                cur[1] = f
                cur[2] = min(cur[2], d)
                continue
            if cur is not None:
                self.closed.append(ViolationEvent(p, cur[0], cur[1], cur[2]))
            self._open[p] = [f, f, d]

    def flush(self, now: int | None = None) -> None:
        """Close events whose gap tolerance has expired (all of them if ``now`` is None)."""
        for p in list(self._open):
            s, e, d = self._open[p]
            if now is None or now - e - 1 > self.max_gap:
                self.closed.append(ViolationEvent(p, s, e, d))
                del self._open[p]

    def events(self) -> list[ViolationEvent]:
        self.flush()
        return sorted(self.closed, key=lambda e: (e.start_frame, e.pair))


def build_events(flags, max_gap: int = 2, min_frames: int = 1) -> list[ViolationEvent]:
    eb = EventBuilder(max_gap)
    eb.feed(flags)
    return [e for e in eb.events() if e.end_frame - e.start_frame + 1 >= min_frames]


def violation_durations(events: Iterable[ViolationEvent], frame_rate: float = 30.0, bin_s: float = 1.0) -> dict[float, int]:
    """Histogram keyed by bin upper edge: a duration d counts toward ceil(d / bin_s) * bin_s."""
    hist: dict[float, int] = {}
    for e in events:
        d = e.duration(frame_rate)
        k = max(1, math.ceil(round(d / bin_s, 9))) * bin_s
        hist[k] = hist.get(k, 0) + 1
    return dict(sorted(hist.items()))


def f1(predicted: Iterable, truth: Iterable) -> tuple[float, float, float]:
    """Precision, recall and F1 of two flag sets over a shared domain."""
    p, t = set(predicted), set(truth)
    tp = len(p & t)
    prec = tp / len(p) if p else 0.0
    rec = tp / len(t) if t else 0.0
    score = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return prec, rec, score


def f1_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    return prec, rec, (2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0)


def track_table(snapshot_frames: Iterable[Iterable], cls=None) -> dict[int, dict]:
    """track id -> {frame: ((x, y), (vx, vy))} from per-frame snapshots."""
    out: dict[int, dict] = {}
    for frame in snapshot_frames:
        for s in frame:
            if cls is None or s.cls == cls:
                out.setdefault(s.track_id, {})[s.frame_index] = (s.world_pos, s.world_vel)
    return out


def positions_by_frame(table: Mapping[int, Mapping]) -> list[tuple[int, dict]]:
    frames: dict[int, dict] = {}
    for tid, hist in table.items():
        for f, (p, _) in hist.items():
            frames.setdefault(f, {})[tid] = p
    return sorted(frames.items())


# -- reports ----------------------------------------------------------------------


def write_turn_csv(path: str | Path, tc: TurnCount) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entry"] + list(MOVEMENTS))
        w.writerows(tc.table())


def write_histogram_csv(path: str | Path, hist: Mapping[float, int], bin_s: float = 1.0) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_upper_s", "count"])
        for k, v in sorted(hist.items()):
            w.writerow([f"{k:g}", v])


def write_f1_csv(path: str | Path, rows: Sequence[tuple[str, float, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "precision", "recall", "f1"])
        for name, p, r, f in rows:
            w.writerow([name, f"{p:.6f}", f"{r:.6f}", f"{f:.6f}"])


def all_pairs(ids: Sequence[int]):
    return [_pair(a, b) for a, b in combinations(sorted(ids), 2)]
