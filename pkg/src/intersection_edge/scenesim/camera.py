"""Bird's-eye camera model and world->pixel projection of ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import CropSpec, Homography, SquareCrop, square_crop
from ..types import ObjClass
from .generate import FrameTruth


@dataclass(frozen=True)
class Camera:
    """World metres -> 1920x1080 source pixels, then the square detector crop.

    ``tilt`` adds a small projective term so the far (north) side of the
    patch appears slightly smaller, as in a calibrated elevated view.
    """

    frame_w: int = 1920
    frame_h: int = 1080
    px_per_m: float = 20.0
    tilt: float = 0.002
    crop: CropSpec = field(default_factory=lambda: CropSpec(544, 124, 832))

    def world_to_source(self) -> Homography:
        s, k = self.px_per_m, self.tilt
        cx, cy = self.frame_w / 2.0, self.frame_h / 2.0
        # (u, v, w) = (s x + cx w, -s y + cy w, 1 + k y)
        return Homography(np.array([[s, cx * k, cx], [0.0, -s + cy * k, cy], [0.0, k, 1.0]]))

    def square_crop(self) -> SquareCrop:
        return square_crop((self.frame_w, self.frame_h), self.crop)

    def world_to_crop(self) -> Homography:
        return self.square_crop().as_homography() @ self.world_to_source()

    @property
    def crop_dims(self) -> tuple[int, int]:
        return (self.crop.side, self.crop.side)

    def calibration_points(self, extent: float = 20.0, n_side: int = 3):
        """Crop-pixel <-> world correspondences on a regular world grid (surveyed markers)."""
        h = self.world_to_crop()
        out = []
        for wx in np.linspace(-extent * 0.8, extent * 0.8, n_side):
            for wy in np.linspace(-extent * 0.8, extent * 0.8, n_side):
                px = h.apply((wx, wy))
                out.append(((px[0], px[1]), (float(wx), float(wy))))
        return out


def footprint_corners(pos: np.ndarray, vel: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """(N, 4, 2) world corners of heading-aligned footprint rectangles."""
    speed = np.linalg.norm(vel, axis=1, keepdims=True)
    heading = np.where(speed > 1e-9, vel / np.maximum(speed, 1e-12), np.array([[1.0, 0.0]]))
    normal = np.c_[-heading[:, 1], heading[:, 0]]
    hl = footprint[:, :1] / 2.0
    hw = footprint[:, 1:2] / 2.0
    c = pos[:, None, :]
    return np.stack(
        [
            c[:, 0] + heading * hl + normal * hw,
            c[:, 0] + heading * hl - normal * hw,
            c[:, 0] - heading * hl - normal * hw,
            c[:, 0] - heading * hl + normal * hw,
        ],
        axis=1,
    )


def project_frame(frame: FrameTruth, h: Homography, frame_dims: tuple[int, int], clip: bool = True):
    """Vectorised projection: (ids, boxes (N, 4), cls) of objects at least partly in view."""
    w, hgt = frame_dims
    n = len(frame)
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, 4)), np.zeros(0, dtype=np.int64)
    corners = footprint_corners(frame.pos, frame.vel, frame.footprint).reshape(-1, 2)
    px = h.apply_many(corners).reshape(n, 4, 2)
    boxes = np.c_[px[:, :, 0].min(1), px[:, :, 1].min(1), px[:, :, 0].max(1), px[:, :, 1].max(1)]
    if clip:
        boxes[:, [0, 2]] = np.clip(boxes[:, [0, 2]], 0, w)
        boxes[:, [1, 3]] = np.clip(boxes[:, [1, 3]], 0, hgt)
    keep = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
    keep &= (boxes[:, 2] > 0) & (boxes[:, 0] < w) & (boxes[:, 3] > 0) & (boxes[:, 1] < hgt)
    return frame.ids[keep], boxes[keep], frame.cls[keep]


def project_to_pixels(frame: FrameTruth, h_inv: Homography, frame_dims: tuple[int, int]):
    """(object id, pixel box) for every object at least partly inside the frame.

    ``h_inv`` maps world metres to pixels. Boxes are the axis-aligned bounds
    of the projected footprint corners, clipped to the frame.
    """
    ids, boxes, _ = project_frame(frame, h_inv, frame_dims)
    return [(int(i), tuple(float(v) for v in b)) for i, b in zip(ids, boxes)]


@dataclass(frozen=True)
class TruthRegion:
    """A face or licence plate with its simulator-side identifiability flag."""

    object_id: int
    kind: str  # "face" | "license_plate"
    box: tuple[int, int, int, int]
    identifiable: bool

    @property
    def area_px(self) -> int:
        return (self.box[2] - self.box[0]) * (self.box[3] - self.box[1])


def face_box(box, heading_px=None) -> tuple[float, float, float, float]:
    """Face region: top 1/7 of a pedestrian box, centred, half its width."""
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    cx = 0.5 * (x0 + x1)
    return (cx - 0.25 * w, y0, cx + 0.25 * w, y0 + h / 7.0)


def plate_box(box, heading_px) -> tuple[float, float, float, float]:
    """Plate region at the rear edge of a vehicle box, opposite ``heading_px``."""
    x0, y0, x1, y1 = box
    w, h = x1 - x0, y1 - y0
    hx, hy = heading_px
    if abs(hx) >= abs(hy):
        # travelling sideways in the image: rear is a vertical edge
        pw, ph = 0.08 * w, 0.45 * h
        cy = 0.5 * (y0 + y1)
        left = x0 if hx > 0 else x1 - pw
        return (left, cy - ph / 2, left + pw, cy + ph / 2)
    pw, ph = 0.45 * w, 0.08 * h
    cx = 0.5 * (x0 + x1)
    top = y1 - ph if hy < 0 else y0
    return (cx - pw / 2, top, cx + pw / 2, top + ph)


def sensitive_regions(frame: FrameTruth, h_inv: Homography, frame_dims, identifiable_area: int = 100):
    """Synthetic faces (on pedestrians) and plates (on vehicles) for one frame.

    A region is identifiable when its clipped pixel area reaches
    ``identifiable_area`` and it faces the camera: faces on pedestrians
    walking toward the bottom of the image, plates on vehicles driving
    toward the top.
    """
    from ..geometry import pixel_rect

    ids, boxes, cls = project_frame(frame, h_inv, frame_dims)
    index = {int(i): k for k, i in enumerate(frame.ids)}
    w, h = frame_dims
    out = []
    for oid, box, c in zip(ids, boxes, cls):
        k = index[int(oid)]
        p = frame.pos[k]
        a = np.asarray(h_inv.apply(p))
        b = np.asarray(h_inv.apply(p + frame.vel[k] * 0.1))
        heading_px = b - a
        if c == ObjClass.PEDESTRIAN:
            kind, region = "face", face_box(box)
            facing = heading_px[1] > 0
        elif c == ObjClass.VEHICLE:
            kind, region = "license_plate", plate_box(box, heading_px)
            facing = heading_px[1] < 0
        else:
            continue
        rect = pixel_rect(region, w, h)
        if rect[2] <= rect[0] or rect[3] <= rect[1]:
            continue
        area = (rect[2] - rect[0]) * (rect[3] - rect[1])
        out.append(TruthRegion(int(oid), kind, rect, bool(facing and area >= identifiable_area)))
    return out
