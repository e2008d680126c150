"""CLEAR-MOT accuracy with frame-wise Hungarian matching and carried-over correspondences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..detemu import EmptyTruth
from ..kernels import iou_matrix
from ..types import ObjClass
from .assoc import solve_assignment


@dataclass(frozen=True)
class MotaResult:
    mota: float
    gt: int
    fn: int
    fp: int
    idsw: int
    matches: int


def mota_from_counts(gt: int, fn: int, fp: int, idsw: int) -> float:
    if gt <= 0:
        raise EmptyTruth("no ground-truth object-frames")
    return 1.0 - (fn + fp + idsw) / gt


def _mota_one_class(hyp_frames, gt_frames, thr: float) -> MotaResult:
    gt_total = fn = fp = idsw = nmatch = 0
    current: dict[int, int] = {}  # truth id -> hypothesis id matched in the previous frame
    last_seen: dict[int, int] = {}  # truth id -> most recent hypothesis ever matched
    for hyps, gts in zip(hyp_frames, gt_frames):
        g_ids = [g[0] for g in gts]
        h_ids = [h[0] for h in hyps]
        gt_total += len(gts)
        if not gts:
            fp += len(hyps)
            current = {}
            continue
        iou = iou_matrix(np.array([h[1] for h in hyps]).reshape(-1, 4), np.array([g[1] for g in gts]).reshape(-1, 4))
        g_index = {g: k for k, g in enumerate(g_ids)}
        h_index = {h: k for k, h in enumerate(h_ids)}
        pairs: dict[int, int] = {}
        used_h = set()
        for g, h in current.items():
            gi, hi = g_index.get(g), h_index.get(h)
            if gi is not None and hi is not None and iou[hi, gi] >= thr:
                pairs[g] = h
                used_h.add(h)
        free_g = [k for k, g in enumerate(g_ids) if g not in pairs]
        free_h = [k for k, h in enumerate(h_ids) if h not in used_h]
        if free_g and free_h:
            sub = iou[np.ix_(free_h, free_g)]
            for a, b in solve_assignment(1.0 - sub, sub >= thr):
                g, h = g_ids[free_g[b]], h_ids[free_h[a]]
                pairs[g] = h
        for g, h in pairs.items():
            if g in last_seen and last_seen[g] != h:
                idsw += 1
            last_seen[g] = h
        nmatch += len(pairs)
        fn += len(gts) - len(pairs)
        fp += len(hyps) - len(pairs)
        current = pairs
    mota = 1.0 - (fn + fp + idsw) / gt_total if gt_total else float("nan")
    return MotaResult(mota, gt_total, fn, fp, idsw, nmatch)


def evaluate_mota(track_frames: Sequence, truth_frames: Sequence, iou_threshold: float = 0.5,
                  classes: Sequence[ObjClass] | None = None) -> dict:
    """Per-class CLEAR-MOT over aligned frames.

    Both inputs are per-frame lists of ``(id, box, class)``; tracks may also
    be :class:`TrackSnapshot` objects. Classes without truth are left out.
    """
    if len(track_frames) != len(truth_frames):
        raise ValueError("track and truth frame ranges differ")

    def rows(frame):
        out = []
        for r in frame:
            if hasattr(r, "track_id"):
                out.append((r.track_id, r.box, int(r.cls)))
            else:
                out.append((int(r[0]), tuple(r[1]), int(r[2])))
        return out

    hyp = [rows(f) for f in track_frames]
    gt = [rows(f) for f in truth_frames]
    present = sorted({c for f in gt for _, _, c in f})
    wanted = [int(c) for c in classes] if classes is not None else present
    res = {}
    for c in wanted:
        if c not in present:
            continue
        r = _mota_one_class([[x for x in f if x[2] == c] for f in hyp], [[x for x in f if x[2] == c] for f in gt], iou_threshold)
        res[ObjClass(c)] = r
    if not res:
        raise EmptyTruth("no ground-truth object-frames")
    return res
