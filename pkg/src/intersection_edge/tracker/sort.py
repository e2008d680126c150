"""SORT-style tracker: predict, associate, update, and track lifecycle."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..geometry import Homography
from ..types import ObjClass
from . import kalman
from .assoc import associate


class OutOfOrderFrame(ValueError):
    pass


class Status(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DEAD = "dead"


@dataclass(frozen=True)
class TrackerConfig:
    iou_threshold: float = 0.3
    max_age: int = 5
    min_hits: int = 3
    min_confidence: float = 0.5  # detections below this never reach association
    appearance: Callable | None = None  # (track, detection) -> similarity in [0, 1]
    appearance_weight: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError("iou_threshold must be in [0, 1]")
        if self.max_age < 0 or self.min_hits < 1:
            raise ValueError("max_age >= 0 and min_hits >= 1 required")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError("min_confidence must be in [0, 1]")
        if not 0.0 <= self.appearance_weight <= 1.0:
            raise ValueError("appearance_weight must be in [0, 1]")


@dataclass
class Track:
    track_id: int
    state: kalman.KalmanState
    cls: ObjClass
    hits: int = 1  # consecutive updates
    age_since_update: int = 0
    status: Status = Status.TENTATIVE
    history: list = field(default_factory=list)  # (frame_index, (x, y)) world metres
    last_frame: int = -1


@dataclass(frozen=True)
class TrackSnapshot:
    frame_index: int
    track_id: int
    cls: ObjClass
    box: tuple[float, float, float, float]
    mean: tuple[float, float, float, float]  # u, v, s, r
    world_pos: tuple[float, float]
    world_vel: tuple[float, float]  # m/s


class Tracker:
    """One instance per camera stream; not thread-safe.

    ``px_to_world`` maps image pixels to world metres for track histories
    and velocities; without it the pixel coordinates are used as is.
    """

    def __init__(self, config: TrackerConfig | None = None, px_to_world: Homography | None = None,
                 frame_rate: float = 30.0):
        self.config = config or TrackerConfig()
        self.px_to_world = px_to_world
        self.frame_rate = frame_rate
        self.tracks: list[Track] = []
        self.finished: list[Track] = []
        self._next_id = 1
        self._last_frame: int | None = None

    def _world(self, u: float, v: float) -> tuple[float, float]:
        if self.px_to_world is None:
            return (u, v)
        p = self.px_to_world.apply((u, v))
        return (float(p[0]), float(p[1]))

    def step(self, frame_index: int, detections: Sequence) -> list[TrackSnapshot]:
        """Advance to ``frame_index`` with its detections; returns emitted tracks.

        A track is emitted on frames where it was updated and its run of
        consecutive hits has reached ``min_hits``.
        """
        cfg = self.config
        if self._last_frame is not None and frame_index <= self._last_frame:
            raise OutOfOrderFrame(f"frame {frame_index} after {self._last_frame}")
        dt = 1 if self._last_frame is None else frame_index - self._last_frame
        self._last_frame = frame_index
        detections = [d for d in detections if d.confidence >= cfg.min_confidence]

        for t in self.tracks:
            t.state = kalman.predict(t.state, dt)
        tboxes = np.array([t.state.box for t in self.tracks]).reshape(-1, 4)
        dboxes = np.array([d.box for d in detections]).reshape(-1, 4)
        matches, un_t, un_d = associate(
            tboxes, [int(t.cls) for t in self.tracks], dboxes, [int(d.cls) for d in detections],
            cfg.iou_threshold, cfg.appearance, cfg.appearance_weight, self.tracks, detections,
        )
        for ti, di in matches:
            t = self.tracks[ti]
            try:
                t.state = kalman.update(t.state, detections[di].box)
            except kalman.SingularInnovation:
                un_t.append(ti)
                continue
            t.hits += 1
            t.age_since_update = 0
            t.last_frame = frame_index
            if t.status is Status.TENTATIVE and t.hits >= cfg.min_hits:
                t.status = Status.CONFIRMED
        for ti in un_t:
            t = self.tracks[ti]
            t.hits = 0
            t.age_since_update += dt
        for di in un_d:
            d = detections[di]
            t = Track(self._next_id, kalman.initiate(d.box), ObjClass(d.cls), last_frame=frame_index)
            self._next_id += 1
            if cfg.min_hits <= 1:
                t.status = Status.CONFIRMED
            self.tracks.append(t)

        alive = []
        for t in self.tracks:
            if t.age_since_update > cfg.max_age:
                t.status = Status.DEAD
                self.finished.append(t)
            else:
                alive.append(t)
        self.tracks = alive

        out = []
        for t in self.tracks:
            if t.age_since_update == 0:
                m = t.state.mean
                wp = self._world(m[0], m[1])
                t.history.append((frame_index, wp))
                if t.status is Status.CONFIRMED and t.hits >= cfg.min_hits:
                    w2 = self._world(m[0] + m[4], m[1] + m[5])
                    wv = ((w2[0] - wp[0]) * self.frame_rate, (w2[1] - wp[1]) * self.frame_rate)
                    out.append(TrackSnapshot(frame_index, t.track_id, t.cls, t.state.box,
                                             (float(m[0]), float(m[1]), float(m[2]), float(m[3])), wp, wv))
        out.sort(key=lambda s: s.track_id)
        return out

    def all_tracks(self) -> list[Track]:
        return self.finished + self.tracks


def run_tracker(frames: Sequence[Sequence], config: TrackerConfig | None = None,
                px_to_world: Homography | None = None, frame_rate: float = 30.0,
                start: int = 0) -> tuple[list[list[TrackSnapshot]], Tracker]:
    """Track a whole list of per-frame detection lists."""
    tr = Tracker(config, px_to_world, frame_rate)
    return [tr.step(start + f, dets) for f, dets in enumerate(frames)], tr
