"""Box-blur redaction of sensitive regions and the coverage-based recall audit."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .geometry import pixel_rect, read_pgm, write_pgm
from .types import ObjClass

KINDS = ("face", "license_plate")


class RegionOutOfBounds(UserWarning):
    """A blur region reached past the frame edge and was clipped."""


@dataclass(frozen=True, eq=False)
class FrameBuffer:
    width: int
    height: int
    pixels: np.ndarray  # (height, width) uint8, row-major

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width) or self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be a (height, width) uint8 array")

    @classmethod
    def from_array(cls, a) -> "FrameBuffer":
        a = np.ascontiguousarray(a, dtype=np.uint8)
        return cls(a.shape[1], a.shape[0], a)

    @classmethod
    def read(cls, path: str | Path) -> "FrameBuffer":
        return cls.from_array(read_pgm(path))

    def write(self, path: str | Path) -> None:
        write_pgm(path, self.pixels)


@dataclass(frozen=True)
class SensitiveRegion:
    box: tuple[int, int, int, int]
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.area_px <= 0:
            raise ValueError("region must have positive area")

    @property
    def area_px(self) -> int:
        return (self.box[2] - self.box[0]) * (self.box[3] - self.box[1])


def clip_region(box, width: int, height: int, log: list | None = None) -> tuple[int, int, int, int] | None:
    """Integer pixel rect of ``box`` inside the frame; warns when clipping was needed."""
    raw = pixel_rect(box)
    r = pixel_rect(box, width, height)
    if r != raw:
        msg = f"region {tuple(box)} clipped to {r}"
        if log is not None:
            log.append(msg)
        warnings.warn(msg, RegionOutOfBounds, stacklevel=3)
    if r[2] <= r[0] or r[3] <= r[1]:
        return None
    return r


def blur_regions(frame: FrameBuffer, regions: Iterable, kernel: int = 15, log: list | None = None) -> FrameBuffer:
    """Box-blur each region, with the kernel window clamped to the region.

    Every region reads the original pixels; where regions overlap the later
    one wins. Pixels outside all regions are copied unchanged.
    """
    if kernel < 3 or kernel % 2 == 0:
        raise ValueError("kernel must be odd and >= 3")
    src = frame.pixels
    dst = src.copy()
    for box in regions:
        r = clip_region(box, frame.width, frame.height, log)
        if r is not None:
            kernels.blur_region(src, dst, *r, kernel)
    return FrameBuffer(frame.width, frame.height, dst)


def blur_boxes_for_detections(detections: Iterable, width: int, height: int, margin: float = 0.25) -> list[tuple[int, int, int, int]]:
    """Redaction rectangles an anonymizer would derive from detector boxes.

    Pedestrians get the head band (top seventh, half width) grown by
    ``margin``; vehicles get strips at both ends of the long axis since a
    single detection does not tell front from rear.
    """
    out = []
    for d in detections:
        x0, y0, x1, y1 = d.box
        w, h = x1 - x0, y1 - y0
        if d.cls == ObjClass.PEDESTRIAN:
            cx = 0.5 * (x0 + x1)
            fw, fh = 0.5 * w * (1 + margin), h / 7.0 * (1 + margin)
            rects = [(cx - fw / 2, y0 - 0.5 * margin * h / 7.0, cx + fw / 2, y0 - 0.5 * margin * h / 7.0 + fh)]
        elif d.cls == ObjClass.VEHICLE:
            if w >= h:
                pw, ph = 0.08 * w * (1 + margin), 0.45 * h * (1 + margin)
                cy = 0.5 * (y0 + y1)
                rects = [(x0 - 0.02 * w, cy - ph / 2, x0 + pw, cy + ph / 2), (x1 - pw, cy - ph / 2, x1 + 0.02 * w, cy + ph / 2)]
            else:
                pw, ph = 0.45 * w * (1 + margin), 0.08 * h * (1 + margin)
                cx = 0.5 * (x0 + x1)
                rects = [(cx - pw / 2, y0 - 0.02 * h, cx + pw / 2, y0 + ph), (cx - pw / 2, y1 - ph, cx + pw / 2, y1 + 0.02 * h)]
        else:
            continue
        for r in rects:
            p = pixel_rect(r, width, height)
            if p[2] > p[0] and p[3] > p[1]:
                out.append(p)
    return out


# -- recall audit ---------------------------------------------------------------------


@dataclass
class RecallStats:
    kind: str
    total: int = 0
    eligible: int = 0  # area >= floor
    anonymized: int = 0  # eligible and covered
    visible: int = 0
    visible_anonymized: int = 0

    @property
    def total_recall(self) -> float:
        return self.anonymized / self.eligible if self.eligible else 1.0

    @property
    def visible_recall(self) -> float:
        return self.visible_anonymized / self.visible if self.visible else 1.0

    def merge(self, other: "RecallStats") -> None:
        self.total += other.total
        self.eligible += other.eligible
        self.anonymized += other.anonymized
        self.visible += other.visible
        self.visible_anonymized += other.visible_anonymized


def is_anonymized(covered_px: int, area_px: int, coverage_min: float = 0.75) -> bool:
    # integer form of covered / area >= coverage_min for the default 3/4
    if coverage_min == 0.75:
        return 4 * covered_px >= 3 * area_px
    return covered_px >= coverage_min * area_px


def evaluate_recall(blurred: Sequence, truth: Sequence, area_floor_px: int = 100,
                    coverage_min: float = 0.75) -> dict[str, RecallStats]:
    """Visible- and total-recall per kind for one frame.

    A truth region is anonymized when the union of ``blurred`` rectangles
    covers at least ``coverage_min`` of its pixels. ``truth`` items carry
    ``box``, ``kind``, ``area_px`` and (optionally) ``identifiable``.
    """
    rects = np.array([pixel_rect(b) for b in blurred], dtype=np.int64).reshape(-1, 4)
    stats = {k: RecallStats(k) for k in KINDS}
    for t in truth:
        st = stats[t.kind]
        st.total += 1
        area = t.area_px
        covered = kernels.union_coverage(t.box, rects) if len(rects) else 0
        hit = is_anonymized(covered, area, coverage_min)
        if area >= area_floor_px:
            st.eligible += 1
            st.anonymized += hit
        if getattr(t, "identifiable", False):
            st.visible += 1
            st.visible_anonymized += hit
    return stats


def coverage_oracle(blurred: Sequence, box, width: int, height: int) -> int:
    """Per-pixel count of ``box`` pixels under any blurred rectangle (test oracle)."""
    m = np.zeros((height, width), dtype=bool)
    for b in blurred:
        x0, y0, x1, y1 = pixel_rect(b, width, height)
        m[max(y0, 0):max(y1, 0), max(x0, 0):max(x1, 0)] = True
    x0, y0, x1, y1 = box
    return int(m[y0:y1, x0:x1].sum())


def write_audit_csv(path: str | Path, stats: dict[str, RecallStats]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "total", "eligible", "anonymized", "visible_recall", "total_recall"])
        for k in KINDS:
            s = stats[k]
            w.writerow([k, s.total, s.eligible, s.anonymized, f"{s.visible_recall:.6f}", f"{s.total_recall:.6f}"])
