"""Track log: frame_index, track_id, class, u, v, s, r, world_x, world_y."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from ..types import ObjClass
from .sort import TrackSnapshot
from .kalman import state_to_box

TRACK_HEADER = "# frame_index,track_id,class,u,v,s,r,world_x,world_y"


def format_track(s: TrackSnapshot) -> str:
    u, v, a, r = s.mean
    return f"{s.frame_index},{s.track_id},{s.cls.label},{u:.4f},{v:.4f},{a:.4f},{r:.6f},{s.world_pos[0]:.4f},{s.world_pos[1]:.4f}"


def write_tracks(path: str | Path, frames: Iterable[Iterable[TrackSnapshot]]) -> int:
    n = 0
    with open(path, "w") as fh:
        fh.write(TRACK_HEADER + "\n")
        for frame in frames:
            for s in frame:
                fh.write(format_track(s) + "\n")
                n += 1
    return n


def read_tracks(path: str | Path, n_frames: int | None = None, frame_rate: float = 30.0) -> list[list[TrackSnapshot]]:
    """Per-frame snapshots from a track log.

    The log carries no velocity, so world velocity is rebuilt from each
    track's consecutive logged positions (backward difference; the first
    sample of a track takes the forward difference).
    """
    rows: dict[int, list] = {}
    with open(path) as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            f, tid, c, u, v, s, r, wx, wy = line.rstrip("\n").split(",")
            rows.setdefault(int(tid), []).append(
                (int(f), ObjClass.parse(c), (float(u), float(v), float(s), float(r)), (float(wx), float(wy))))
    by_frame: dict[int, list] = {}
    for tid, hist in rows.items():
        hist.sort(key=lambda h: h[0])
        for k, (f, c, mean, wp) in enumerate(hist):
            j0, j1 = (k - 1, k) if k > 0 else (0, 1)
            if j1 < len(hist):
                (fa, _, _, pa), (fb, _, _, pb) = hist[j0], hist[j1]
                dt = (fb - fa) / frame_rate
                wv = ((pb[0] - pa[0]) / dt, (pb[1] - pa[1]) / dt)
            else:
                wv = (0.0, 0.0)
            by_frame.setdefault(f, []).append(TrackSnapshot(f, tid, c, state_to_box(mean), mean, wp, wv))
    count = n_frames if n_frames is not None else max(by_frame, default=-1) + 1
    return [sorted(by_frame.get(f, []), key=lambda s: s.track_id) for f in range(count)]
