# cython: language_level=3
"""Compiled inner loops. Contracts mirror ``_pykernels`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def iou_matrix(double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double ix0, iy0, ix1, iy1, w, h, inter, area_a, area_b, union
    for i in range(n):
        area_a = (a[i, 2] - a[i, 0]) * (a[i, 3] - a[i, 1])
        for j in range(m):
            ix0 = a[i, 0] if a[i, 0] > b[j, 0] else b[j, 0]
            iy0 = a[i, 1] if a[i, 1] > b[j, 1] else b[j, 1]
            ix1 = a[i, 2] if a[i, 2] < b[j, 2] else b[j, 2]
            iy1 = a[i, 3] if a[i, 3] < b[j, 3] else b[j, 3]
            w = ix1 - ix0
            h = iy1 - iy0
            if w <= 0.0 or h <= 0.0:
                continue
            inter = w * h
            area_b = (b[j, 2] - b[j, 0]) * (b[j, 3] - b[j, 1])
            union = area_a + area_b - inter
            if union > 0.0:
                o[i, j] = inter / union
    return out


def blur_region(const unsigned char[:, ::1] src, unsigned char[:, ::1] dst,
                Py_ssize_t x0, Py_ssize_t y0, Py_ssize_t x1, Py_ssize_t y1, Py_ssize_t kernel):
    cdef Py_ssize_t w = x1 - x0, h = y1 - y0, half = kernel // 2
    cdef Py_ssize_t y, x, ya, yb, xa, xb
    cdef long long s, cnt
    if w <= 0 or h <= 0:
        return
    sat_arr = np.zeros((h + 1, w + 1), dtype=np.int64)
    cdef long long[:, ::1] sat = sat_arr
    for y in range(h):
        for x in range(w):
            sat[y + 1, x + 1] = src[y0 + y, x0 + x] + sat[y, x + 1] + sat[y + 1, x] - sat[y, x]
    for y in range(h):
        ya = y - half if y - half > 0 else 0
        yb = y + half + 1 if y + half + 1 < h else h
        for x in range(w):
            xa = x - half if x - half > 0 else 0
            xb = x + half + 1 if x + half + 1 < w else w
            s = sat[yb, xb] - sat[ya, xb] - sat[yb, xa] + sat[ya, xa]
            cnt = (yb - ya) * (xb - xa)
            dst[y0 + y, x0 + x] = <unsigned char>((2 * s + cnt) // (2 * cnt))


def union_coverage(long long tx0, long long ty0, long long tx1, long long ty1, long long[:, ::1] rects):
    """Pixels of the target rectangle covered by the union of ``rects`` (half-open)."""
    cdef Py_ssize_t k = rects.shape[0], i, a, c
    cdef long long total = 0, x0, x1, y0, y1, covered_y, run_start, run_end, yv
    if tx1 <= tx0 or ty1 <= ty0 or k == 0:
        return 0
    clipped = np.empty((k, 4), dtype=np.int64)
    cdef long long[:, ::1] cr = clipped
    cdef Py_ssize_t n = 0
    for i in range(k):
        x0 = rects[i, 0] if rects[i, 0] > tx0 else tx0
        y0 = rects[i, 1] if rects[i, 1] > ty0 else ty0
        x1 = rects[i, 2] if rects[i, 2] < tx1 else tx1
        y1 = rects[i, 3] if rects[i, 3] < ty1 else ty1
        if x1 > x0 and y1 > y0:
            cr[n, 0] = x0
            cr[n, 1] = y0
            cr[n, 2] = x1
            cr[n, 3] = y1
            n += 1
    if n == 0:
        return 0
    xs = np.unique(np.concatenate([clipped[:n, 0], clipped[:n, 2]]))
    cdef long long[::1] xv = xs
    ys_buf = np.empty((2 * n,), dtype=np.int64)
    cdef long long[::1] ys = ys_buf
    cdef Py_ssize_t nx = xv.shape[0], m
    cdef long long[:, ::1] pv
    for a in range(nx - 1):
        # y-intervals of rects spanning this x-slab; sorted by start then merged
        m = 0
        for i in range(n):
            if cr[i, 0] <= xv[a] and cr[i, 2] >= xv[a + 1]:
                ys[2 * m] = cr[i, 1]
                ys[2 * m + 1] = cr[i, 3]
                m += 1
        if m == 0:
            continue
        pairs = np.asarray(ys_buf[: 2 * m]).reshape(m, 2)
        pv = np.ascontiguousarray(pairs[np.argsort(pairs[:, 0], kind="stable")])
        covered_y = 0
        run_start = pv[0, 0]
        run_end = pv[0, 1]
        for c in range(1, m):
            yv = pv[c, 0]
            if yv > run_end:
                covered_y += run_end - run_start
                run_start = yv
                run_end = pv[c, 1]
            elif pv[c, 1] > run_end:
                run_end = pv[c, 1]
        covered_y += run_end - run_start
        total += covered_y * (xv[a + 1] - xv[a])
    return total


def kf_predict(double[::1] mean, double[:, ::1] cov, double[:, ::1] F, double[:, ::1] Q):
    cdef Py_ssize_t n = mean.shape[0], i, j, k
    cdef double acc
    new_mean = np.empty(n, dtype=np.float64)
    new_cov = np.empty((n, n), dtype=np.float64)
    tmp_arr = np.empty((n, n), dtype=np.float64)
    cdef double[::1] nm = new_mean
    cdef double[:, ::1] nc = new_cov
    cdef double[:, ::1] tmp = tmp_arr
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc += F[i, k] * mean[k]
        nm[i] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += F[i, k] * cov[k, j]
            tmp[i, j] = acc
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for k in range(n):
                acc += tmp[i, k] * F[j, k]
            acc += 0.5 * (Q[i, j] + Q[j, i])
            nc[i, j] = acc
            nc[j, i] = acc
    return new_mean, new_cov


def kf_update(double[::1] mean, double[:, ::1] cov, double[::1] z, double[:, ::1] H, double[:, ::1] R):
    """Kalman correction via Cholesky of the innovation covariance.

    Returns ``None`` when the innovation covariance is not positive definite.
    """
    cdef Py_ssize_t n = mean.shape[0], m = z.shape[0], i, j, k
    cdef double acc
    PHt_arr = np.empty((n, m), dtype=np.float64)
    S_arr = np.empty((m, m), dtype=np.float64)
    L_arr = np.zeros((m, m), dtype=np.float64)
    K_arr = np.empty((n, m), dtype=np.float64)
    y_arr = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] PHt = PHt_arr
    cdef double[:, ::1] S = S_arr
    cdef double[:, ::1] L = L_arr
    cdef double[:, ::1] K = K_arr
    cdef double[::1] y = y_arr
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(n):
                acc += cov[i, k] * H[j, k]
            PHt[i, j] = acc
    for i in range(m):
        for j in range(m):
            acc = 0.0
            for k in range(n):
                acc += H[i, k] * PHt[k, j]
            S[i, j] = acc + R[i, j]
        acc = 0.0
        for k in range(n):
            acc += H[i, k] * mean[k]
        y[i] = z[i] - acc
    for j in range(m):
        acc = S[j, j]
        for k in range(j):
            acc -= L[j, k] * L[j, k]
        if not acc > 0.0:
            return None
        L[j, j] = sqrt(acc)
        for i in range(j + 1, m):
            acc = S[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            L[i, j] = acc / L[j, j]
    # K = PHt S^-1  ->  solve L L^T K^T = PHt^T row by row
    cdef double[::1] col = np.empty(m, dtype=np.float64)
    for i in range(n):
        for j in range(m):
            acc = PHt[i, j]
            for k in range(j):
                acc -= L[j, k] * col[k]
            col[j] = acc / L[j, j]
        for j in range(m - 1, -1, -1):
            acc = col[j]
            for k in range(j + 1, m):
                acc -= L[k, j] * K[i, k]
            K[i, j] = acc / L[j, j]
    new_mean = np.empty(n, dtype=np.float64)
    new_cov = np.empty((n, n), dtype=np.float64)
    cdef double[::1] nm = new_mean
    cdef double[:, ::1] nc = new_cov
    for i in range(n):
        acc = mean[i]
        for j in range(m):
            acc += K[i, j] * y[j]
        nm[i] = acc
    # P - K S K^T; only the upper triangle is computed, then mirrored
    for i in range(n):
        for j in range(i, n):
            acc = 0.0
            for k in range(m):
                acc += K[i, k] * PHt[j, k]
            acc = cov[i, j] - acc
            nc[i, j] = acc
            nc[j, i] = acc
    return new_mean, new_cov
