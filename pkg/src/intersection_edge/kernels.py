"""Backend selection for the hot kernels.

The compiled extension is preferred. Set ``INTERSECTION_EDGE_PURE=1`` to
force the numpy fallback (benchmarks and parity tests flip this per call
via :func:`use_backend`).
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _pykernels

try:
    from . import _ckernels  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

_impl: ModuleType
BACKEND: str


def available_backends() -> list[str]:
    return ["python"] if _ckernels is None else ["compiled", "python"]


def use_backend(name: str) -> None:
    global _impl, BACKEND
    if name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built")
        _impl = _ckernels
    elif name == "python":
        _impl = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name


use_backend("python" if _ckernels is None or os.environ.get("INTERSECTION_EDGE_PURE") == "1" else "compiled")


def iou_matrix(a, b) -> np.ndarray:
    """Pairwise IoU of (x_min, y_min, x_max, y_max) boxes, shape (len(a), len(b))."""
    a = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    return _impl.iou_matrix(a, b)


def blur_region(src: np.ndarray, dst: np.ndarray, x0: int, y0: int, x1: int, y1: int, kernel: int) -> None:
    """Write the region-clamped box-filter mean of ``src`` into ``dst`` over [x0,x1)x[y0,y1)."""
    _impl.blur_region(src, dst, int(x0), int(y0), int(x1), int(y1), int(kernel))


def union_coverage(target, rects) -> int:
    """Number of integer pixels of ``target`` covered by the union of ``rects``."""
    r = np.ascontiguousarray(rects, dtype=np.int64).reshape(-1, 4)
    tx0, ty0, tx1, ty1 = (int(v) for v in target)
    return int(_impl.union_coverage(tx0, ty0, tx1, ty1, r))


def kf_predict(mean, cov, F, Q):
    return _impl.kf_predict(
        np.ascontiguousarray(mean, dtype=np.float64),
        np.ascontiguousarray(cov, dtype=np.float64),
        np.ascontiguousarray(F, dtype=np.float64),
        np.ascontiguousarray(Q, dtype=np.float64),
    )


def kf_update(mean, cov, z, H, R):
    """Posterior (mean, cov), or ``None`` if the innovation covariance is not SPD."""
    return _impl.kf_update(
        np.ascontiguousarray(mean, dtype=np.float64),
        np.ascontiguousarray(cov, dtype=np.float64),
        np.ascontiguousarray(z, dtype=np.float64),
        np.ascontiguousarray(H, dtype=np.float64),
        np.ascontiguousarray(R, dtype=np.float64),
    )
