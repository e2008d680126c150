"""Planar routes built from straight segments and circular fillets, plus
time parametrisation under longitudinal and lateral acceleration limits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Line:
    p0: tuple[float, float]
    p1: tuple[float, float]

    @property
    def length(self) -> float:
        return float(np.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1]))

    def sample(self, s: np.ndarray):
        L = self.length
        d = (np.subtract(self.p1, self.p0) / L) if L > 0 else np.array([1.0, 0.0])
        pos = np.asarray(self.p0) + s[:, None] * d
        tan = np.broadcast_to(d, pos.shape)
        return pos, tan, np.zeros(len(s))


@dataclass(frozen=True)
class Arc:
    center: tuple[float, float]
    radius: float
    theta0: float
    sweep: float  # signed, positive = counter-clockwise

    @property
    def length(self) -> float:
        return abs(self.sweep) * self.radius

    def sample(self, s: np.ndarray):
        sign = 1.0 if self.sweep > 0 else -1.0
        th = self.theta0 + sign * s / self.radius
        c = np.asarray(self.center)
        pos = c + self.radius * np.c_[np.cos(th), np.sin(th)]
        tan = sign * np.c_[-np.sin(th), np.cos(th)]
        return pos, tan, np.full(len(s), sign / self.radius)


def fillet_polyline(points, radius: float | list[float]) -> list[Line | Arc]:
    """Replace each interior corner of a polyline with a tangent arc.

    A corner's tangent points sit ``radius * tan(turn/2)`` back along both
    legs; the legs must be long enough to hold them.
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    n = len(pts)
    radii = [radius] * (n - 2) if np.isscalar(radius) else list(radius)
    segs: list[Line | Arc] = []
    cursor = pts[0]
    for i in range(1, n - 1):
        a, b, c = pts[i - 1], pts[i], pts[i + 1]
        d_in = (b - a) / np.linalg.norm(b - a)
        d_out = (c - b) / np.linalg.norm(c - b)
        cross = d_in[0] * d_out[1] - d_in[1] * d_out[0]
        dot = float(np.clip(d_in @ d_out, -1.0, 1.0))
        turn = np.arctan2(cross, dot)
        r = radii[i - 1]
        if abs(turn) < 1e-9 or r <= 0:
            segs.append(Line(tuple(cursor), tuple(b)))
            cursor = b
            continue
        back = r * np.tan(abs(turn) / 2)
        t_in = b - d_in * back
        t_out = b + d_out * back
        left = np.array([-d_in[1], d_in[0]])
        center = t_in + (left if turn > 0 else -left) * r
        theta0 = float(np.arctan2(t_in[1] - center[1], t_in[0] - center[0]))
        if np.linalg.norm(t_in - cursor) > 1e-12:
            segs.append(Line(tuple(cursor), tuple(t_in)))
        segs.append(Arc(tuple(center), r, theta0, float(turn)))
        cursor = t_out
    if np.linalg.norm(pts[-1] - cursor) > 1e-12:
        segs.append(Line(tuple(cursor), tuple(pts[-1])))
    return segs


class Route:
    """A path sampled on a fine arclength grid with its speed profile.

    ``offset`` shifts the whole route sideways (positive = left of travel)
    while keeping the arclength parametrisation of the centre line, so
    several objects sharing a route and timing stay a fixed distance apart.
    """

    DS = 0.05

    def __init__(self, segments, cruise: float, a_long: float, a_lat: float, v_min: float = 0.3):
        self.segments = list(segments)
        lengths = [seg.length for seg in self.segments]
        self.length = float(sum(lengths))
        n = max(int(np.ceil(self.length / self.DS)), 1) + 1
        s = np.linspace(0.0, self.length, n)
        pos = np.empty((n, 2))
        tan = np.empty((n, 2))
        kap = np.empty(n)
        bounds = np.concatenate([[0.0], np.cumsum(lengths)])
        idx = np.clip(np.searchsorted(bounds, s, side="right") - 1, 0, len(self.segments) - 1)
        for k, seg in enumerate(self.segments):
            sel = idx == k
            if sel.any():
                p, t, c = seg.sample(s[sel] - bounds[k])
                pos[sel], tan[sel], kap[sel] = p, t, c
        self.s, self.pos, self.tan, self.kappa = s, pos, tan, kap
        self.cruise = cruise
        self.speed = _speed_profile(s, kap, cruise, a_long, a_lat, v_min)
        # trapezoidal time integral of ds / v
        dt = np.diff(s) * 0.5 * (1.0 / self.speed[:-1] + 1.0 / self.speed[1:])
        self.t = np.concatenate([[0.0], np.cumsum(dt)])
        self.duration = float(self.t[-1])

    def state_at(self, t: np.ndarray, offset: float = 0.0):
        """Position, velocity and arclength at route-relative times ``t``."""
        t = np.asarray(t, dtype=float)
        s = np.interp(t, self.t, self.s)
        pos, tan, kap = self.geometry_at(s)
        v = np.interp(s, self.s, self.speed)
        if offset:
            pos = pos + offset * np.c_[-tan[:, 1], tan[:, 0]]
            v = v * (1.0 - kap * offset)
        return pos, v[:, None] * tan, s

    def geometry_at(self, s: np.ndarray):
        """Exact position, unit tangent and signed curvature at arclengths ``s``."""
        bounds = np.concatenate([[0.0], np.cumsum([seg.length for seg in self.segments])])
        idx = np.clip(np.searchsorted(bounds, s, side="right") - 1, 0, len(self.segments) - 1)
        pos = np.empty((len(s), 2))
        tan = np.empty((len(s), 2))
        kap = np.empty(len(s))
        for k, seg in enumerate(self.segments):
            sel = idx == k
            if sel.any():
                pos[sel], tan[sel], kap[sel] = seg.sample(s[sel] - bounds[k])
        return pos, tan, kap


def _speed_profile(s, kappa, cruise, a_long, a_lat, v_min):
    vmax = np.full(len(s), float(cruise))
    curved = np.abs(kappa) > 1e-12
    vmax[curved] = np.minimum(vmax[curved], np.sqrt(a_lat / np.abs(kappa[curved])))
    vmax = np.maximum(vmax, v_min)
    v = vmax.copy()
    ds = np.diff(s)
    for i in range(1, len(s)):
        v[i] = min(v[i], np.sqrt(v[i - 1] ** 2 + 2 * a_long * ds[i - 1]))
    for i in range(len(s) - 2, -1, -1):
        v[i] = min(v[i], np.sqrt(v[i + 1] ** 2 + 2 * a_long * ds[i]))
    return v


def signed_turn_angle(points: np.ndarray) -> float:
    """Total signed heading change along a polyline, radians (CCW positive)."""
    d = np.diff(np.asarray(points, dtype=float), axis=0)
    d = d[np.linalg.norm(d, axis=1) > 1e-9]
    if len(d) < 2:
        return 0.0
    h = np.arctan2(d[:, 1], d[:, 0])
    dh = np.diff(h)
    dh = (dh + np.pi) % (2 * np.pi) - np.pi
    return float(dh.sum())
