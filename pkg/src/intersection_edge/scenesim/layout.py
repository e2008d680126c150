"""Four-arm intersection geometry: arms, lanes, sidewalks and crosswalks.

Right-hand traffic. Arms are named by compass direction and identified by
their outward unit vector; the intersection box is |x|, |y| <= box_half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .paths import Route, fillet_polyline

ARMS = ("N", "E", "S", "W")
ARM_DIRS = {"N": (0.0, 1.0), "E": (1.0, 0.0), "S": (0.0, -1.0), "W": (-1.0, 0.0)}

MOVEMENTS = ("left", "right", "straight", "u_turn")

# (entry arm, exit arm) -> movement for right-hand traffic
_ORDER = {"N": 0, "E": 1, "S": 2, "W": 3}


def turn_label(entry: str, exit_: str) -> str:
    """Movement for a route entering from ``entry`` and leaving through ``exit_``."""
    d = (_ORDER[exit_] - _ORDER[entry]) % 4
    # travelling in from N (heading south), E lies to the driver's left
    return {0: "u_turn", 1: "left", 2: "straight", 3: "right"}[d]


TURN_TABLE = {(a, b): turn_label(a, b) for a in ARMS for b in ARMS}


def _right_of(h) -> np.ndarray:
    return np.array([h[1], -h[0]])


@dataclass(frozen=True)
class Layout:
    extent: float = 20.0  # half side of the modelled patch, metres
    box_half: float = 7.0  # half side of the intersection box
    lane_offset: float = 3.0
    sidewalk_offset: float = 8.5
    spawn_margin: float = 3.0  # objects start/end this far outside the patch
    corner_radius: float = 2.0

    def arm_polygon(self, arm: str) -> np.ndarray:
        """Road area of one arm as a CCW quad (metres)."""
        b, e = self.box_half, self.extent + self.spawn_margin
        quads = {
            "N": [(-b, b), (b, b), (b, e), (-b, e)],
            "S": [(-b, -e), (b, -e), (b, -b), (-b, -b)],
            "E": [(b, -b), (e, -b), (e, b), (b, b)],
            "W": [(-e, -b), (-b, -b), (-b, b), (-e, b)],
        }
        return np.array(quads[arm], dtype=float)

    def arm_polygons(self) -> dict[str, np.ndarray]:
        return {a: self.arm_polygon(a) for a in ARMS}

    def arm_of(self, x: float, y: float) -> str | None:
        b = self.box_half
        if abs(x) < b and y > b:
            return "N"
        if abs(x) < b and y < -b:
            return "S"
        if abs(y) < b and x > b:
            return "E"
        if abs(y) < b and x < -b:
            return "W"
        return None

    def in_box(self, x: float, y: float) -> bool:
        return abs(x) <= self.box_half and abs(y) <= self.box_half

    # -- road routes -------------------------------------------------------

    def vehicle_polyline(self, entry: str, exit_: str, lateral: float = 0.0) -> tuple[list, list[float]]:
        far = self.extent + self.spawn_margin
        b, lo = self.box_half, self.lane_offset + lateral
        d_in = np.array(ARM_DIRS[entry])
        d_out = np.array(ARM_DIRS[exit_])
        h_in = -d_in
        p_start = d_in * far + _right_of(h_in) * lo
        p_end = d_out * far + _right_of(d_out) * lo
        if entry == exit_:
            # U-turn: two quarter turns of radius lane_offset around the box edge
            a = d_in * (b - lo) + _right_of(h_in) * lo
            c = d_in * (b - lo) - _right_of(h_in) * lo
            return [p_start, a, c, p_end], [lo, lo]
        label = turn_label(entry, exit_)
        if label == "straight":
            return [p_start, p_end], []
        # lane centre lines are axis-parallel, so they cross at the sum of their offsets
        r_in = _right_of(h_in) * lo
        corner = r_in + _right_of(d_out) * lo
        radius = float(np.linalg.norm(corner - (d_in * b + r_in)))
        return [p_start, corner, p_end], [radius]

    def vehicle_route(self, entry: str, exit_: str, cruise: float, a_long: float, a_lat: float,
                      lateral: float = 0.0) -> Route:
        pts, radii = self.vehicle_polyline(entry, exit_, lateral)
        return Route(fillet_polyline(pts, radii) if radii else fillet_polyline(pts, 0.0), cruise, a_long, a_lat)

    # -- pedestrian network ----------------------------------------------

    def corners(self) -> dict[str, np.ndarray]:
        o = self.sidewalk_offset
        return {"NE": np.array([o, o]), "NW": np.array([-o, o]), "SW": np.array([-o, -o]), "SE": np.array([o, -o])}

    CORNER_ORDER = ("NE", "NW", "SW", "SE")  # counter-clockwise

    def corner_legs(self, corner: str) -> dict[str, np.ndarray]:
        """Far ends of the two sidewalk legs leaving a corner, keyed by arm."""
        far = self.extent + self.spawn_margin
        c = self.corners()[corner]
        legs = {}
        for arm in corner:
            d = np.array(ARM_DIRS[arm])
            p = c.copy()
            p[np.argmax(np.abs(d))] = d[np.argmax(np.abs(d))] * far
            legs[arm] = p
        return legs

    def pedestrian_polyline(self, start_corner: str, entry_leg: str, crossings: int, direction: int,
                            exit_leg: str, lateral: float = 0.0) -> list[np.ndarray]:
        """Sidewalk leg in, ``crossings`` crosswalks around the block, leg out.

        ``direction`` is +1 for counter-clockwise corner order, -1 otherwise.
        ``lateral`` shifts the walking line perpendicular to travel before filleting.
        """
        order = self.CORNER_ORDER
        k = order.index(start_corner)
        seq = [order[(k + direction * j) % 4] for j in range(crossings + 1)]
        pts = [self.corner_legs(seq[0])[entry_leg]] + [self.corners()[c] for c in seq]
        pts.append(self.corner_legs(seq[-1])[exit_leg])
        return _offset_polyline(pts, lateral)


def _offset_polyline(pts, d: float) -> list[np.ndarray]:
    """Parallel polyline shifted ``d`` to the left of travel (mitre joins)."""
    pts = [np.asarray(p, dtype=float) for p in pts]
    if not d:
        return pts
    out = []
    for i, p in enumerate(pts):
        normals = []
        if i > 0:
            t = (p - pts[i - 1]) / np.linalg.norm(p - pts[i - 1])
            normals.append(np.array([-t[1], t[0]]))
        if i < len(pts) - 1:
            t = (pts[i + 1] - p) / np.linalg.norm(pts[i + 1] - p)
            normals.append(np.array([-t[1], t[0]]))
        n = sum(normals)
        n = n / np.linalg.norm(n)
        cosang = float(n @ normals[0])
        out.append(p + n * d / cosang)
    return out
