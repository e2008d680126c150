"""Scoring a pipeline run against simulator ground truth."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import analytics
from .kernels import iou_matrix
from .scenesim.generate import IncompleteRoute, Scene, truth_turn_label
from .scenesim.layout import Layout
from .tracker.assoc import solve_assignment
from .types import ObjClass


def truth_turn_counts(scene: Scene, cls: ObjClass = ObjClass.VEHICLE) -> analytics.TurnCount:
    """Movements of every road user whose entry and exit both fall inside the run."""
    tc = analytics.TurnCount()
    for info in scene.routes.values():
        if info.cls != cls or info.first_frame < 0:
            continue
        try:
            tc.add(info.entry, truth_turn_label(info))
        except IncompleteRoute:
            pass
    return tc


def track_turn_counts(tracks, layout: Layout | None = None, cls: ObjClass = ObjClass.VEHICLE) -> analytics.TurnCount:
    """Counts from full tracker histories (tentative updates included)."""
    return analytics.count_turns((t.history for t in tracks if t.cls == cls and t.history), layout)


def match_tracks_to_truth(track_frames: Sequence, truth_frames: Sequence, iou_threshold: float = 0.5,
                          cls: ObjClass | None = None) -> list[dict[int, int]]:
    """Per-frame track id -> truth id by one-to-one same-class IoU matching."""
    out = []
    for hyps, gts in zip(track_frames, truth_frames):
        hyps = [h for h in hyps if cls is None or h.cls == cls]
        gts = [g for g in gts if cls is None or g[2] == int(cls)]
        m: dict[int, int] = {}
        if hyps and gts:
            iou = iou_matrix(np.array([h.box for h in hyps]), np.array([g[1] for g in gts]))
            same = np.array([[int(h.cls) == g[2] for g in gts] for h in hyps])
            for a, b in solve_assignment(1.0 - iou, same & (iou >= iou_threshold)):
                m[hyps[a].track_id] = gts[b][0]
        out.append(m)
    return out


def truth_violations(scene: Scene, visible: Sequence[set], threshold_m: float = 2.0) -> set:
    """Pair-frames of visible pedestrians closer than the threshold and not in the same group."""
    out = set()
    for fr, vis in zip(scene, visible):
        ped = [k for k in range(len(fr)) if fr.cls[k] == ObjClass.PEDESTRIAN and int(fr.ids[k]) in vis]
        if len(ped) < 2:
            continue
        p = fr.pos[ped]
        d = np.sqrt(((p[:, None] - p[None]) ** 2).sum(-1))
        for i, j in zip(*np.nonzero(np.triu(d < threshold_m, k=1))):
            a, b = ped[i], ped[j]
            ga, gb = int(fr.group[a]), int(fr.group[b])
            if ga and ga == gb:
                continue
            ia, ib = int(fr.ids[a]), int(fr.ids[b])
            out.add((fr.frame_index, min(ia, ib), max(ia, ib)))
    return out


@dataclass(frozen=True)
class DistancingScore:
    raw: tuple[float, float, float]  # precision, recall, F1 without group validation
    validated: tuple[float, float, float]
    n_truth: int
    n_raw: int
    n_kept: int
    events: list


def score_distancing(scene: Scene, track_frames: Sequence, truth_frames: Sequence, threshold_m: float = 2.0,
                     window: int = 30, d_group: float = 1.5, sigma_max: float = 0.4, cos_min: float = 0.9,
                     max_gap: int = 2) -> DistancingScore:
    """Violation-classification F1 over pair-frames, with and without group validation."""
    table = analytics.track_table(track_frames, ObjClass.PEDESTRIAN)
    raw = analytics.pairwise_violations(analytics.positions_by_frame(table), threshold_m)
    _, kept = analytics.validate_groups(raw, table, window, d_group, sigma_max, cos_min)
    ids = match_tracks_to_truth(track_frames, truth_frames, 0.5, ObjClass.PEDESTRIAN)
    visible = [{g[0] for g in gts if g[2] == int(ObjClass.PEDESTRIAN)} for gts in truth_frames]
    truth = truth_violations(scene, visible, threshold_m)

    def mapped(flags):
        out = set()
        for f, a, b, _ in flags:
            ga, gb = ids[f].get(a), ids[f].get(b)
            if ga is None or gb is None or ga == gb:
                out.add(("track", f, a, b))  # cannot correspond to a truth pair-frame
            else:
                out.add((f, min(ga, gb), max(ga, gb)))
        return out

    events = analytics.build_events(kept, max_gap)
    return DistancingScore(analytics.f1(mapped(raw), truth), analytics.f1(mapped(kept), truth),
                           len(truth), len(raw), len(kept), events)
