"""IoU-cost Hungarian association of predicted track boxes with detections."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..kernels import iou_matrix

FORBIDDEN = 1e6  # stands in for infinite cost so the solver stays feasible
TIE_EPS = 1e-12


def solve_assignment(cost: np.ndarray, allowed: np.ndarray) -> list[tuple[int, int]]:
    """Maximum-cardinality, then minimum-cost matching over allowed pairs.

    Among equal-cost optima the result is pushed toward the lowest
    lexicographic (row, col) assignment by pairwise exchanges.
    """
    n, m = cost.shape
    if n == 0 or m == 0 or not allowed.any():
        return []
    c = np.where(allowed, cost, FORBIDDEN)
    rows, cols = linear_sum_assignment(c)
    assign = {int(r): int(k) for r, k in zip(rows, cols) if allowed[r, k]}
    _canonicalise(assign, c, allowed, m)
    return sorted(assign.items())


def _canonicalise(assign: dict, c: np.ndarray, allowed: np.ndarray, m: int) -> None:
    changed = True
    while changed:
        changed = False
        rows = sorted(assign)
        for a_i, i in enumerate(rows):
            di = assign[i]
            # move to a smaller free column at equal cost
            used = set(assign.values())
            for d in range(di):
                if d not in used and allowed[i, d] and abs(c[i, d] - c[i, di]) <= TIE_EPS:
                    assign[i] = d
                    changed = True
                    break
            if changed:
                break
            for j in rows[a_i + 1:]:
                dj = assign[j]
                if dj < di and allowed[i, dj] and allowed[j, di]:
                    if abs(c[i, dj] + c[j, di] - c[i, di] - c[j, dj]) <= TIE_EPS:
                        assign[i], assign[j] = dj, di
                        changed = True
                        break
            if changed:
                break


def associate(track_boxes, track_cls: Sequence[int], det_boxes, det_cls: Sequence[int],
              iou_threshold: float = 0.3, appearance: Callable | None = None, lam: float = 0.0,
              track_keys: Sequence | None = None, det_keys: Sequence | None = None):
    """Returns ``(matches, unmatched_tracks, unmatched_detections)``.

    Cost is ``1 - IoU`` plus ``lam * (1 - appearance(track, det))`` when a
    similarity hook is given. Cross-class pairs and pairs below
    ``iou_threshold`` can never match.
    """
    nt, nd = len(track_cls), len(det_cls)
    if nt == 0 or nd == 0:
        return [], list(range(nt)), list(range(nd))
    iou = iou_matrix(track_boxes, det_boxes)
    cost = 1.0 - iou
    if appearance is not None and lam > 0:
        tk = track_keys if track_keys is not None else range(nt)
        dk = det_keys if det_keys is not None else range(nd)
        sim = np.array([[appearance(a, b) for b in dk] for a in tk], dtype=float)
        cost = cost + lam * (1.0 - sim)
    allowed = (np.asarray(track_cls)[:, None] == np.asarray(det_cls)[None, :]) & (iou >= iou_threshold)
    matches = solve_assignment(cost, allowed)
    mt = {t for t, _ in matches}
    md = {d for _, d in matches}
    return matches, [t for t in range(nt) if t not in mt], [d for d in range(nd) if d not in md]
