"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` module is unavailable or when
``INTERSECTION_EDGE_PURE=1`` is set. Each function matches its compiled
twin bit-for-bit on integer outputs and to rounding on float outputs.
"""

from __future__ import annotations

import numpy as np


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    ix0 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy0 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix1 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy1 = np.minimum(a[:, None, 3], b[None, :, 3])
    w = ix1 - ix0
    h = iy1 - iy0
    inter = np.where((w > 0) & (h > 0), w * h, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where((inter > 0) & (union > 0), inter / union, 0.0)
    return out


def blur_region(src: np.ndarray, dst: np.ndarray, x0: int, y0: int, x1: int, y1: int, kernel: int) -> None:
    w, h = x1 - x0, y1 - y0
    if w <= 0 or h <= 0:
        return
    half = kernel // 2
    sat = np.zeros((h + 1, w + 1), dtype=np.int64)
    sat[1:, 1:] = src[y0:y1, x0:x1].astype(np.int64).cumsum(0).cumsum(1)
    ys = np.arange(h)
    xs = np.arange(w)
    ya = np.maximum(ys - half, 0)[:, None]
    yb = np.minimum(ys + half + 1, h)[:, None]
    xa = np.maximum(xs - half, 0)[None, :]
    xb = np.minimum(xs + half + 1, w)[None, :]
    s = sat[yb, xb] - sat[ya, xb] - sat[yb, xa] + sat[ya, xa]
    cnt = (yb - ya) * (xb - xa)
    dst[y0:y1, x0:x1] = ((2 * s + cnt) // (2 * cnt)).astype(np.uint8)


def union_coverage(tx0: int, ty0: int, tx1: int, ty1: int, rects: np.ndarray) -> int:
    if tx1 <= tx0 or ty1 <= ty0 or len(rects) == 0:
        return 0
    r = np.asarray(rects, dtype=np.int64).copy()
    r[:, 0] = np.maximum(r[:, 0], tx0)
    r[:, 1] = np.maximum(r[:, 1], ty0)
    r[:, 2] = np.minimum(r[:, 2], tx1)
    r[:, 3] = np.minimum(r[:, 3], ty1)
    r = r[(r[:, 2] > r[:, 0]) & (r[:, 3] > r[:, 1])]
    if len(r) == 0:
        return 0
    xs = np.unique(np.concatenate([r[:, 0], r[:, 2]]))
    total = 0
    for xa, xb in zip(xs[:-1], xs[1:]):
        span = r[(r[:, 0] <= xa) & (r[:, 2] >= xb)]
        if len(span) == 0:
            continue
        span = span[np.argsort(span[:, 1], kind="stable")]
        covered = 0
        start, end = int(span[0, 1]), int(span[0, 3])
        for y0, y1 in span[1:, [1, 3]]:
            if y0 > end:
                covered += end - start
                start, end = int(y0), int(y1)
            elif y1 > end:
                end = int(y1)
        covered += end - start
        total += covered * int(xb - xa)
    return total


def kf_predict(mean, cov, F, Q):
    new_cov = F @ cov @ F.T + 0.5 * (Q + Q.T)
    new_cov = 0.5 * (new_cov + new_cov.T)
    return F @ mean, new_cov


def kf_update(mean, cov, z, H, R):
    pht = cov @ H.T
    S = H @ pht + R
    try:
        chol = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None
    # K^T = S^-1 (P H^T)^T
    kt = np.linalg.solve(chol.T, np.linalg.solve(chol, pht.T))
    K = kt.T
    new_mean = mean + K @ (z - H @ mean)
    new_cov = cov - K @ pht.T
    return new_mean, 0.5 * (new_cov + new_cov.T)
