"""Pixel/world mapping, scene masks and the square-crop input transform.

World frame: origin at the intersection centre, x east, y north, metres.
Pixel boxes are ``(x_min, y_min, x_max, y_max)`` with x right and y down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GeometryError(ValueError):
    pass


class DegenerateProjection(GeometryError):
    """Third homogeneous coordinate vanished."""


class DegenerateConfiguration(GeometryError):
    """Correspondences do not determine a homography."""


class SpecOutOfBounds(GeometryError):
    """Crop rectangle does not fit inside the source frame."""


_W_EPS = 1e-12


@dataclass(frozen=True)
class Homography:
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64).reshape(3, 3)
        if abs(m[2, 2]) > 1e-9:
            m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateConfiguration("homography matrix is singular")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def scaling(cls, sx: float, sy: float | None = None) -> "Homography":
        return cls(np.diag([sx, sx if sy is None else sy, 1.0]))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def __matmul__(self, other: "Homography") -> "Homography":
        return Homography(self.m @ other.m)

    def apply(self, p) -> tuple[float, float]:
        return apply_homography(self, p)

    def apply_many(self, pts) -> np.ndarray:
        """Vectorised :func:`apply_homography` over an (N, 2) array."""
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        hom = pts @ self.m[:, :2].T + self.m[:, 2]
        w = hom[:, 2]
        if np.any(np.abs(w) < _W_EPS):
            raise DegenerateProjection("point maps to infinity")
        return hom[:, :2] / w[:, None]


def apply_homography(h: Homography, p) -> tuple[float, float]:
    x, y = float(p[0]), float(p[1])
    m = h.m
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) < _W_EPS:
        raise DegenerateProjection(f"w={w!r} at point ({x}, {y})")
    return ((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w, (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w)


def _normalizing_transform(pts: np.ndarray) -> np.ndarray:
    centroid = pts.mean(axis=0)
    mean_dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if mean_dist < 1e-15:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]])


def _has_collinear_triple(pts: np.ndarray, tol: float = 1e-9) -> bool:
    n = len(pts)
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-300) ** 2
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                a, b, c = pts[i], pts[j], pts[k]
                cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
                if abs(cross) <= tol * scale:
                    return True
    return False


def calibrate(correspondences: Sequence[tuple[Sequence[float], Sequence[float]]]) -> Homography:
    """Estimate the pixel->world homography with the normalised DLT.

    Exactly determined for four correspondences, linear least squares
    (smallest right singular vector) beyond that. Four points with a
    collinear triple are rejected.
    """
    if len(correspondences) < 4:
        raise DegenerateConfiguration(f"need at least 4 correspondences, got {len(correspondences)}")
    src = np.array([c[0] for c in correspondences], dtype=np.float64)
    dst = np.array([c[1] for c in correspondences], dtype=np.float64)
    if len(src) == 4 and (_has_collinear_triple(src) or _has_collinear_triple(dst)):
        raise DegenerateConfiguration("three of the four points are collinear")
    t_src = _normalizing_transform(src)
    t_dst = _normalizing_transform(dst)
    ps = np.c_[src, np.ones(len(src))] @ t_src.T
    pd = np.c_[dst, np.ones(len(dst))] @ t_dst.T

    rows = []
    for (x, y, _), (u, v, _) in zip(ps, pd):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v])
    a = np.array(rows)
    _, sv, vt = np.linalg.svd(a)
    # a rank below 8 leaves a multi-dimensional null space
    if sv[7] <= 1e-10 * sv[0]:
        raise DegenerateConfiguration("linear system is rank deficient")
    hn = vt[-1].reshape(3, 3)
    m = np.linalg.inv(t_dst) @ hn @ t_src
    if abs(m[2, 2]) < 1e-12 or abs(np.linalg.det(m)) < 1e-300:
        raise DegenerateConfiguration("recovered matrix is degenerate")
    return Homography(m)


@dataclass(frozen=True)
class CropSpec:
    offset_x: int
    offset_y: int
    side: int = 832


@dataclass(frozen=True)
class SquareCrop:
    """Source-pixel -> cropped-pixel transform for a validated :class:`CropSpec`."""

    spec: CropSpec
    frame_w: int
    frame_h: int

    def to_crop(self, p) -> tuple[float, float] | None:
        """Cropped coordinates, or ``None`` when the point is out of view."""
        x = p[0] - self.spec.offset_x
        y = p[1] - self.spec.offset_y
        if 0 <= x < self.spec.side and 0 <= y < self.spec.side:
            return (x, y)
        return None

    def to_source(self, p) -> tuple[float, float]:
        return (p[0] + self.spec.offset_x, p[1] + self.spec.offset_y)

    def as_homography(self) -> Homography:
        return Homography(np.array([[1.0, 0, -self.spec.offset_x], [0, 1.0, -self.spec.offset_y], [0, 0, 1.0]]))


def square_crop(frame_dims: tuple[int, int], spec: CropSpec) -> SquareCrop:
    w, h = frame_dims
    if spec.side <= 0:
        raise SpecOutOfBounds("crop side must be positive")
    if spec.offset_x < 0 or spec.offset_y < 0 or spec.offset_x + spec.side > w or spec.offset_y + spec.side > h:
        raise SpecOutOfBounds(f"crop {spec} does not fit a {w}x{h} frame")
    return SquareCrop(spec, w, h)


def centered_crop(frame_dims: tuple[int, int], side: int = 832) -> CropSpec:
    w, h = frame_dims
    return CropSpec((w - side) // 2, (h - side) // 2, side)


@dataclass(frozen=True)
class SceneMask:
    width: int
    height: int
    bitmap: np.ndarray = field(repr=False)

    def __post_init__(self):
        bm = np.asarray(self.bitmap, dtype=bool).reshape(-1)
        if bm.size != self.width * self.height:
            raise GeometryError("bitmap length must equal width*height")
        if not bm.any():
            raise GeometryError("mask has no region of interest")
        bm = bm.reshape(self.height, self.width)
        bm.setflags(write=False)
        object.__setattr__(self, "bitmap", bm)
        # summed-area table for O(1) box coverage queries
        sat = np.zeros((self.height + 1, self.width + 1), dtype=np.int64)
        sat[1:, 1:] = bm.cumsum(0).cumsum(1)
        object.__setattr__(self, "_sat", sat)

    @classmethod
    def full(cls, width: int, height: int) -> "SceneMask":
        return cls(width, height, np.ones(width * height, dtype=bool))

    def coverage(self, box) -> float:
        """Fraction of in-frame box pixels that are region-of-interest."""
        x0, y0, x1, y1 = pixel_rect(box, self.width, self.height)
        area = (x1 - x0) * (y1 - y0)
        if area <= 0:
            return 0.0
        s = self._sat
        on = s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0]
        return float(on) / area

    def contains(self, x: float, y: float) -> bool:
        xi, yi = int(np.floor(x)), int(np.floor(y))
        return 0 <= xi < self.width and 0 <= yi < self.height and bool(self.bitmap[yi, xi])


def pixel_rect(box, width: int | None = None, height: int | None = None) -> tuple[int, int, int, int]:
    """Integer half-open pixel rectangle covering a float box, optionally clipped."""
    x0 = int(np.floor(box[0]))
    y0 = int(np.floor(box[1]))
    x1 = int(np.ceil(box[2]))
    y1 = int(np.ceil(box[3]))
    if width is not None:
        x0, x1 = max(x0, 0), min(x1, width)
    if height is not None:
        y0, y1 = max(y0, 0), min(y1, height)
    return x0, y0, x1, y1


def apply_mask(mask: SceneMask, box, threshold: float = 0.5) -> bool:
    """True (kept) iff at least ``threshold`` of the box pixels lie in the ROI."""
    return mask.coverage(box) >= threshold


# -- file formats ---------------------------------------------------------


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary (P5, maxval <= 255) PGM into a uint8 (H, W) array."""
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise GeometryError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise GeometryError(f"{path}: 16-bit PGM not supported")
    pos += 1
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos)
    return pixels.reshape(h, w).copy()


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + pixels.tobytes())


def load_mask(path: str | Path) -> SceneMask:
    img = read_pgm(path)
    return SceneMask(img.shape[1], img.shape[0], img > 127)


def save_mask(path: str | Path, mask: SceneMask) -> None:
    write_pgm(path, np.where(mask.bitmap, 255, 0).astype(np.uint8))


def load_correspondences(path: str | Path) -> list[tuple[tuple[float, float], tuple[float, float]]]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise GeometryError(f"{path}:{lineno}: expected 'px py wx wy'")
        px, py, wx, wy = map(float, parts)
        out.append(((px, py), (wx, wy)))
    return out


def save_correspondences(path: str | Path, pairs: Iterable) -> None:
    lines = [f"{p[0]!r} {p[1]!r} {w[0]!r} {w[1]!r}" for p, w in pairs]
    Path(path).write_text("\n".join(lines) + "\n")
