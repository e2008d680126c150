"""Seeded synthetic traffic for a four-arm intersection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np

from ..types import ObjClass
from .layout import ARMS, MOVEMENTS, TURN_TABLE, Layout
from .paths import Route, fillet_polyline


class InvalidConfig(ValueError):
    pass


class IncompleteRoute(ValueError):
    """The object was not seen both entering and leaving the intersection."""


MAX_SPEED = 27.78  # 100 km/h
MAX_PED_SPEED = 3.0

# longitudinal / lateral limits; their vector sum stays under the class bound
VEHICLE_A_LONG, VEHICLE_A_LAT = 2.0, 2.0  # |a| <= 2.83 < 3.0 m/s^2
PED_A_LONG, PED_A_LAT = 0.6, 0.8  # |a| <= 1.0 (1.28 on the outer side of a group) < 1.5 m/s^2
ACCEL_BOUND = {ObjClass.VEHICLE: 3.0, ObjClass.BICYCLE: 3.0, ObjClass.PEDESTRIAN: 1.5}

GROUP_OFFSETS = {1: (0.0,), 2: (-0.3, 0.3), 3: (-0.5, 0.0, 0.5)}
GROUP_MAX_DISTANCE = 1.2


@dataclass(frozen=True)
class ScriptedObject:
    """An object placed by hand instead of by the spawn process.

    Road users take ``entry``/``exit`` arms; pedestrians take explicit
    ``waypoints`` (filleted with the layout corner radius).
    """

    cls: ObjClass
    speed: float
    spawn_time: float = 0.0
    entry: str | None = None
    exit: str | None = None
    waypoints: tuple | None = None
    group_size: int = 1
    lateral: float = 0.0
    footprint: tuple[float, float] | None = None


DEFAULT_TURN_PROBS = {"straight": 0.60, "left": 0.18, "right": 0.18, "u_turn": 0.04}


@dataclass(frozen=True)
class SceneConfig:
    frame_rate: float = 30.0
    duration: float = 60.0
    seed: int = 0
    spawn_rates: dict = field(default_factory=lambda: {"vehicle": 24.0, "pedestrian": 24.0, "bicycle": 2.0})
    warmup: float = 40.0
    layout: Layout = field(default_factory=Layout)
    group_size_probs: tuple = (0.7, 0.2, 0.1)
    turn_probs: dict = field(default_factory=lambda: dict(DEFAULT_TURN_PROBS))
    vehicle_speed: tuple = (5.0, 12.0)
    bicycle_speed: tuple = (3.0, 6.0)
    pedestrian_speed: tuple = (1.0, 1.7)
    scripted: tuple = ()
    avoid_conflicts: bool = True

    def validate(self) -> None:
        if not self.frame_rate > 0:
            raise InvalidConfig("frame_rate must be positive")
        if not self.duration >= 0:
            raise InvalidConfig("duration must be non-negative")
        for k, v in self.spawn_rates.items():
            if k not in ("vehicle", "pedestrian", "bicycle"):
                raise InvalidConfig(f"unknown class in spawn_rates: {k!r}")
            if v < 0:
                raise InvalidConfig(f"spawn rate for {k} is negative")
        if abs(sum(self.group_size_probs) - 1.0) > 1e-9 or len(self.group_size_probs) > 3:
            raise InvalidConfig("group_size_probs must sum to 1 over sizes 1..3")
        if set(self.turn_probs) - set(MOVEMENTS) or abs(sum(self.turn_probs.values()) - 1.0) > 1e-9:
            raise InvalidConfig("turn_probs must be a distribution over movements")
        if self.vehicle_speed[1] > MAX_SPEED or self.bicycle_speed[1] > MAX_SPEED:
            raise InvalidConfig("road speeds above 100 km/h")
        if self.pedestrian_speed[1] > MAX_PED_SPEED:
            raise InvalidConfig("pedestrian speed above 3 m/s")
        polys = self.layout.arm_polygons()
        for i, a in enumerate(ARMS):
            for b in ARMS[i + 1:]:
                pa, pb = polys[a], polys[b]
                if (pa[:, 0].min() < pb[:, 0].max() and pb[:, 0].min() < pa[:, 0].max()
                        and pa[:, 1].min() < pb[:, 1].max() and pb[:, 1].min() < pa[:, 1].max()):
                    raise InvalidConfig(f"arms {a} and {b} overlap")
        for s in self.scripted:
            if s.speed <= 0 or s.speed > (MAX_PED_SPEED if s.cls == ObjClass.PEDESTRIAN else MAX_SPEED):
                raise InvalidConfig(f"scripted speed out of range: {s}")

    @property
    def frame_period_us(self) -> int:
        return int(round(1e6 / self.frame_rate))

    @property
    def n_frames(self) -> int:
        return int(round(self.duration * self.frame_rate))


@dataclass(frozen=True, slots=True)
class GroundTruthObject:
    id: int
    cls: ObjClass
    pos: tuple[float, float]
    vel: tuple[float, float]
    footprint: tuple[float, float]  # (length, width) metres
    group_id: int | None = None


@dataclass(frozen=True)
class FrameTruth:
    """All objects present in one frame, stored column-wise."""

    frame_index: int
    timestamp_us: int
    ids: np.ndarray
    cls: np.ndarray
    pos: np.ndarray
    vel: np.ndarray
    footprint: np.ndarray
    group: np.ndarray  # 0 = no group

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def objects(self) -> list[GroundTruthObject]:
        return [
            GroundTruthObject(
                int(self.ids[k]), ObjClass(int(self.cls[k])),
                (float(self.pos[k, 0]), float(self.pos[k, 1])),
                (float(self.vel[k, 0]), float(self.vel[k, 1])),
                (float(self.footprint[k, 0]), float(self.footprint[k, 1])),
                int(self.group[k]) or None,
            )
            for k in range(len(self.ids))
        ]

    def equals(self, other: "FrameTruth") -> bool:
        return (
            self.frame_index == other.frame_index and self.timestamp_us == other.timestamp_us
            and all(np.array_equal(getattr(self, n), getattr(other, n))
                    for n in ("ids", "cls", "pos", "vel", "footprint", "group"))
        )


@dataclass
class RouteInfo:
    id: int
    cls: ObjClass
    route: Route = field(repr=False)
    offset: float
    t0: float
    footprint: tuple[float, float]
    entry: str | None
    exit: str | None
    group_id: int | None
    first_frame: int = -1
    last_frame: int = -1
    s_first: float = 0.0
    s_last: float = 0.0
    s_box_in: float = math.inf
    s_box_out: float = -math.inf


class Scene(Sequence[FrameTruth]):
    """Generated frames plus per-object route metadata."""

    def __init__(self, config: SceneConfig, frames: list[FrameTruth], routes: dict[int, RouteInfo]):
        self.config = config
        self.frames = frames
        self.routes = routes

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    def __iter__(self) -> Iterator[FrameTruth]:
        return iter(self.frames)

    def object_frames(self) -> int:
        return sum(len(f) for f in self.frames)


def truth_turn_label(info: RouteInfo) -> str:
    """Movement of a road user whose entry and exit both fall inside the run."""
    if info.entry is None or info.exit is None:
        raise IncompleteRoute(f"object {info.id} has no road route")
    if info.first_frame < 0 or not (info.s_first < info.s_box_in and info.s_last > info.s_box_out):
        raise IncompleteRoute(f"object {info.id} not observed from entry to exit")
    return TURN_TABLE[(info.entry, info.exit)]


# -- generation -------------------------------------------------------------


@dataclass
class _Agent:
    info: RouteInfo
    frames: np.ndarray
    pos: np.ndarray
    vel: np.ndarray

    @property
    def f0(self) -> int:
        return int(self.frames[0])

    @property
    def f1(self) -> int:
        return int(self.frames[-1])


def _box_span(route: Route, layout: Layout, offset: float) -> tuple[float, float]:
    pos, tan, _ = route.geometry_at(route.s)
    if offset:
        pos = pos + offset * np.c_[-tan[:, 1], tan[:, 0]]
    inside = (np.abs(pos[:, 0]) <= layout.box_half) & (np.abs(pos[:, 1]) <= layout.box_half)
    if not inside.any():
        return math.inf, -math.inf
    idx = np.flatnonzero(inside)
    return float(route.s[idx[0]]), float(route.s[idx[-1]])


def _materialise(info: RouteInfo, cfg: SceneConfig, n_frames: int) -> _Agent | None:
    fps = cfg.frame_rate
    f_lo = max(math.ceil(info.t0 * fps - 1e-9), 0)
    f_hi = min(math.floor((info.t0 + info.route.duration) * fps + 1e-9), n_frames - 1)
    if f_hi < f_lo:
        return None
    frames = np.arange(f_lo, f_hi + 1)
    tau = np.clip(frames / fps - info.t0, 0.0, info.route.duration)
    pos, vel, s = info.route.state_at(tau, info.offset)
    info.first_frame, info.last_frame = int(f_lo), int(f_hi)
    info.s_first, info.s_last = float(s[0]), float(s[-1])
    return _Agent(info, frames, pos, vel)


def _overlap(a: _Agent, b: _Agent):
    lo, hi = max(a.f0, b.f0), min(a.f1, b.f1)
    if hi < lo:
        return None
    sa = slice(lo - a.f0, hi - a.f0 + 1)
    sb = slice(lo - b.f0, hi - b.f0 + 1)
    return sa, sb


def _road_conflict(cand: _Agent, other: _Agent) -> bool:
    ov = _overlap(cand, other)
    if ov is None:
        return False
    d = np.linalg.norm(cand.pos[ov[0]] - other.pos[ov[1]], axis=1)
    clearance = 0.5 * (cand.info.footprint[0] + other.info.footprint[0]) + 0.8
    return bool(d.min() < clearance)


def _ped_conflict(cand: _Agent, other: _Agent) -> bool:
    """Strangers neither walk through each other nor tail each other closely."""
    if cand.info.group_id is not None and cand.info.group_id == other.info.group_id:
        return False
    ov = _overlap(cand, other)
    if ov is None:
        return False
    pa, pb = cand.pos[ov[0]], other.pos[ov[1]]
    d = np.linalg.norm(pa - pb, axis=1)
    if d.min() < 0.7:
        return True
    va, vb = cand.vel[ov[0]], other.vel[ov[1]]
    cos = (va * vb).sum(1) / (np.linalg.norm(va, axis=1) * np.linalg.norm(vb, axis=1))
    return int(((d < 2.5) & (cos > 0.5)).sum()) > 15


def _sample_footprint(cls: ObjClass, rng: np.random.Generator) -> tuple[float, float]:
    if cls == ObjClass.VEHICLE:
        return (float(rng.uniform(4.2, 5.0)), float(rng.uniform(1.7, 1.95)))
    if cls == ObjClass.BICYCLE:
        return (float(rng.uniform(0.9, 1.1)), 0.6)
    side = float(rng.uniform(0.5, 0.7))
    return (side, side)


_ROAD_LATERAL = {ObjClass.VEHICLE: 0.0, ObjClass.BICYCLE: 2.0}


class _Builder:
    def __init__(self, cfg: SceneConfig):
        self.cfg = cfg
        self.layout = cfg.layout
        self.n_frames = cfg.n_frames
        self.next_id = 1
        self.next_group = 1
        self.agents: list[_Agent] = []
        self.active_road: list[_Agent] = []
        self.active_ped: list[_Agent] = []

    def _prune(self, frame: int) -> None:
        self.active_road = [a for a in self.active_road if a.f1 >= frame]
        self.active_ped = [a for a in self.active_ped if a.f1 >= frame]

    def road_route(self, cls, entry, exit_, speed, lateral) -> Route:
        return self.layout.vehicle_route(entry, exit_, speed, VEHICLE_A_LONG, VEHICLE_A_LAT,
                                         lateral=_ROAD_LATERAL[cls] + lateral)

    def ped_route(self, pts, speed) -> Route:
        return Route(fillet_polyline(pts, self.layout.corner_radius), speed, PED_A_LONG, PED_A_LAT)

    def add(self, cls, route, t0, footprints, entry, exit_, offsets, check: bool, rng=None,
            retries: int = 6) -> list[int]:
        """Materialise one spawn (a group when several offsets); returns accepted ids."""
        # spawns arrive in time order, so nothing ending before this frame can matter again
        prune_frame = max(math.floor(t0 * self.cfg.frame_rate), 0)
        for attempt in range(retries + 1):
            group = None
            if len(offsets) > 1:
                group = self.next_group
            cands = []
            for k, off in enumerate(offsets):
                info = RouteInfo(-1, cls, route, off, t0, footprints[k], entry, exit_, group)
                ag = _materialise(info, self.cfg, self.n_frames)
                if ag is not None:
                    cands.append(ag)
            if not cands:
                return []
            if check and self.cfg.avoid_conflicts:
                self._prune(prune_frame)
                pool, test = ((self.active_ped, _ped_conflict) if cls == ObjClass.PEDESTRIAN
                              else (self.active_road, _road_conflict))
                if any(test(c, o) for c in cands for o in pool):
                    if rng is None or attempt == retries:
                        return []
                    t0 += float(rng.uniform(1.0, 3.0))
                    continue
            ids = []
            if group is not None:
                self.next_group += 1
            for ag in cands:
                ag.info.id = self.next_id
                self.next_id += 1
                ag.info.s_box_in, ag.info.s_box_out = _box_span(route, self.layout, ag.info.offset)
                self.agents.append(ag)
                (self.active_ped if cls == ObjClass.PEDESTRIAN else self.active_road).append(ag)
                ids.append(ag.info.id)
            return ids
        return []


def _spawn_events(cfg: SceneConfig, ss: np.random.SeedSequence):
    events = []
    children = ss.spawn(3)
    for ci, name in enumerate(("vehicle", "pedestrian", "bicycle")):
        rate = cfg.spawn_rates.get(name, 0.0) / 60.0
        if rate <= 0:
            continue
        rng = np.random.default_rng(children[ci])
        t = -cfg.warmup
        while True:
            t += float(rng.exponential(1.0 / rate))
            if t >= cfg.duration:
                break
            events.append((t, ci, name))
    events.sort(key=lambda e: (e[0], e[1]))
    return events


def generate(config: SceneConfig) -> Scene:
    """Deterministically produce every frame of a scene from its config."""
    config.validate()
    b = _Builder(config)
    ss = np.random.SeedSequence(config.seed & ((1 << 64) - 1))
    ev_seq, attr_seq = ss.spawn(2)
    rng = np.random.default_rng(attr_seq)
    lay = config.layout

    for s in config.scripted:
        cls = ObjClass.parse(s.cls)
        fp = s.footprint or _sample_footprint(cls, rng)
        if cls == ObjClass.PEDESTRIAN:
            route = b.ped_route([np.asarray(p, float) for p in s.waypoints], s.speed)
            offs = GROUP_OFFSETS[s.group_size]
            b.add(cls, route, s.spawn_time, [fp] * len(offs), None, None, offs, check=False)
        else:
            route = b.road_route(cls, s.entry, s.exit, s.speed, s.lateral)
            b.add(cls, route, s.spawn_time, [fp], s.entry, s.exit, (0.0,), check=False)

    moves = list(config.turn_probs)
    move_p = np.array([config.turn_probs[m] for m in moves])
    exit_for = {a: {TURN_TABLE[(a, e)]: e for e in ARMS} for a in ARMS}
    for t0, _, name in _spawn_events(config, ev_seq):
        if name in ("vehicle", "bicycle"):
            cls = ObjClass.VEHICLE if name == "vehicle" else ObjClass.BICYCLE
            entry = ARMS[int(rng.integers(4))]
            move = moves[int(rng.choice(len(moves), p=move_p))]
            lo, hi = config.vehicle_speed if cls == ObjClass.VEHICLE else config.bicycle_speed
            speed = float(rng.uniform(lo, hi))
            lateral = float(rng.uniform(-0.3, 0.3))
            fp = _sample_footprint(cls, rng)
            exit_ = exit_for[entry][move]
            route = b.road_route(cls, entry, exit_, speed, lateral)
            b.add(cls, route, t0, [fp], entry, exit_, (0.0,), check=True, rng=rng)
        else:
            size = 1 + int(rng.choice(len(config.group_size_probs), p=np.asarray(config.group_size_probs)))
            corner = lay.CORNER_ORDER[int(rng.integers(4))]
            entry_leg = corner[int(rng.integers(2))]
            crossings = int(rng.choice(3, p=[0.25, 0.55, 0.20]))
            direction = 1 if rng.random() < 0.5 else -1
            end_corner = lay.CORNER_ORDER[(lay.CORNER_ORDER.index(corner) + direction * crossings) % 4]
            legs = [a for a in end_corner if crossings or a != entry_leg]
            exit_leg = legs[int(rng.integers(len(legs)))]
            lateral = float(rng.uniform(-0.6, 0.6))
            speed = float(rng.uniform(*config.pedestrian_speed))
            fps = [_sample_footprint(ObjClass.PEDESTRIAN, rng) for _ in range(size)]
            pts = lay.pedestrian_polyline(corner, entry_leg, crossings, direction, exit_leg, lateral)
            route = b.ped_route(pts, speed)
            b.add(ObjClass.PEDESTRIAN, route, t0, fps, None, None, GROUP_OFFSETS[size], check=True, rng=rng)

    return Scene(config, _assemble(b.agents, config), {a.info.id: a.info for a in b.agents})


def _assemble(agents: list[_Agent], cfg: SceneConfig) -> list[FrameTruth]:
    n = cfg.n_frames
    period = cfg.frame_period_us
    if not agents:
        e2 = np.zeros((0, 2))
        e1i = np.zeros(0, dtype=np.int64)
        return [FrameTruth(f, f * period, e1i, e1i, e2, e2, e2, e1i) for f in range(n)]
    frames = np.concatenate([a.frames for a in agents])
    ids = np.concatenate([np.full(len(a.frames), a.info.id) for a in agents])
    cls = np.concatenate([np.full(len(a.frames), int(a.info.cls)) for a in agents])
    grp = np.concatenate([np.full(len(a.frames), a.info.group_id or 0) for a in agents])
    fp = np.concatenate([np.tile(a.info.footprint, (len(a.frames), 1)) for a in agents])
    pos = np.concatenate([a.pos for a in agents])
    vel = np.concatenate([a.vel for a in agents])
    order = np.lexsort((ids, frames))
    frames, ids, cls, grp, fp, pos, vel = (x[order] for x in (frames, ids, cls, grp, fp, pos, vel))
    cuts = np.searchsorted(frames, np.arange(n + 1))
    out = []
    for f in range(n):
        sl = slice(cuts[f], cuts[f + 1])
        out.append(FrameTruth(f, f * period, ids[sl], cls[sl], pos[sl], vel[sl], fp[sl], grp[sl]))
    return out


def with_seed(config: SceneConfig, seed: int) -> SceneConfig:
    return replace(config, seed=seed)
