"""Ground-truth logs and scene-config tables."""

from __future__ import annotations

from dataclasses import fields, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..types import ObjClass
from .generate import FrameTruth, InvalidConfig, SceneConfig, ScriptedObject
from .layout import Layout

GT_HEADER = "# frame_index,timestamp_us,id,class,x,y,vx,vy,len,wid,group_id"


def write_ground_truth(path: str | Path, frames: Iterable[FrameTruth]) -> int:
    """One object-frame per line; returns the number of records."""
    n = 0
    with open(path, "w") as fh:
        fh.write(GT_HEADER + "\n")
        for fr in frames:
            for k in range(len(fr)):
                fh.write(
                    f"{fr.frame_index},{fr.timestamp_us},{int(fr.ids[k])},{ObjClass(int(fr.cls[k])).label},"
                    f"{fr.pos[k, 0]:.6f},{fr.pos[k, 1]:.6f},{fr.vel[k, 0]:.6f},{fr.vel[k, 1]:.6f},"
                    f"{fr.footprint[k, 0]:.4f},{fr.footprint[k, 1]:.4f},{int(fr.group[k])}\n"
                )
                n += 1
    return n


def read_ground_truth(path: str | Path, n_frames: int | None = None, frame_period_us: int | None = None) -> list[FrameTruth]:
    """Inverse of :func:`write_ground_truth` (to the written precision).

    Frames without objects leave no lines, so pass ``n_frames`` and
    ``frame_period_us`` to restore them.
    """
    rows: dict[int, list] = {}
    stamps: dict[int, int] = {}
    with open(path) as fh:
        for line in fh:
            if not line.strip() or line.startswith("#"):
                continue
            p = line.rstrip("\n").split(",")
            f = int(p[0])
            stamps[f] = int(p[1])
            rows.setdefault(f, []).append(
                (int(p[2]), int(ObjClass.parse(p[3])), float(p[4]), float(p[5]), float(p[6]),
                 float(p[7]), float(p[8]), float(p[9]), int(p[10]))
            )
    last = max(rows, default=-1)
    count = n_frames if n_frames is not None else last + 1
    out = []
    for f in range(count):
        r = rows.get(f, [])
        a = np.array(r, dtype=float).reshape(-1, 9)
        ts = stamps.get(f, f * frame_period_us if frame_period_us is not None else -1)
        out.append(FrameTruth(
            f, ts, a[:, 0].astype(np.int64), a[:, 1].astype(np.int64), a[:, 2:4].copy(),
            a[:, 4:6].copy(), a[:, 6:8].copy(), a[:, 8].astype(np.int64),
        ))
    return out


def iter_ground_truth(path: str | Path) -> Iterator[tuple]:
    with open(path) as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                yield tuple(line.rstrip("\n").split(","))


_SCALARS = {"frame_rate", "duration", "seed", "warmup", "avoid_conflicts"}
_PAIRS = {"vehicle_speed", "bicycle_speed", "pedestrian_speed", "group_size_probs"}


def scene_config_from_dict(d: dict) -> SceneConfig:
    """Build a :class:`SceneConfig` from a parsed TOML ``[scene]`` table."""
    known = {f.name for f in fields(SceneConfig)}
    unknown = set(d) - known
    if unknown:
        raise InvalidConfig(f"unknown scene keys: {sorted(unknown)}")
    kw = {}
    for k, v in d.items():
        if k in _SCALARS:
            kw[k] = v
        elif k in _PAIRS:
            kw[k] = tuple(float(x) for x in v)
        elif k in ("spawn_rates", "turn_probs"):
            kw[k] = {str(a): float(b) for a, b in v.items()}
        elif k == "layout":
            kw[k] = replace(Layout(), **v)
        elif k == "scripted":
            kw[k] = tuple(
                ScriptedObject(**{**s, "cls": ObjClass.parse(s["cls"]),
                                  **({"waypoints": tuple(tuple(p) for p in s["waypoints"])} if "waypoints" in s else {}),
                                  **({"footprint": tuple(s["footprint"])} if "footprint" in s else {})})
                for s in v
            )
    cfg = SceneConfig(**kw)
    cfg.validate()
    return cfg
