"""Run configuration: TOML loading, defaults and a stable hash."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, is_dataclass, replace
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..detemu import LatencyModel, MissCurve, NoiseProfile
from ..geometry import CropSpec
from ..scenesim.camera import Camera
from ..scenesim.generate import InvalidConfig, SceneConfig
from ..scenesim.io import scene_config_from_dict
from ..tracker import TrackerConfig
from ..types import ObjClass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LatencyConfig:
    base_us: float = 28580.0
    density_increase: float = 0.40
    sweep_frames: int = 2700
    sweep_low: int = 4000
    sweep_high: int = 26000

    def model(self) -> LatencyModel:
        return LatencyModel.calibrated(self.base_us, self.density_increase, self.sweep_frames,
                                       self.sweep_low, self.sweep_high)


@dataclass(frozen=True)
class AnalyticsConfig:
    threshold_m: float = 2.0
    window: int = 30
    d_group: float = 1.5
    sigma_max: float = 0.4
    cos_min: float = 0.9
    max_gap: int = 2
    min_event_frames: int = 1
    bin_s: float = 1.0


@dataclass(frozen=True)
class AnonymizeConfig:
    kernel: int = 15
    area_floor_px: int = 100
    coverage_min: float = 0.75
    identifiable_area_px: int = 100
    audit_frames: int = 100


@dataclass(frozen=True)
class RadarConfig:
    sink: str = "file"
    group: str = "239.0.0.120"
    port: int = 12120
    mtu: int = 9000
    intersection_id: int = 1
    budget_us: int = 33333
    realtime_seconds: float = 300.0
    queue_depth: int = 2


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    scene: SceneConfig = field(default_factory=SceneConfig)
    camera: Camera = field(default_factory=Camera)
    noise: NoiseProfile = field(default_factory=NoiseProfile)
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    analytics: AnalyticsConfig = field(default_factory=AnalyticsConfig)
    anonymize: AnonymizeConfig = field(default_factory=AnonymizeConfig)
    radar: RadarConfig = field(default_factory=RadarConfig)
    mask_path: str | None = None
    calibration_path: str | None = None
    source: str = "<defaults>"

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, seed=seed, scene=replace(self.scene, seed=seed))

    def digest(self) -> str:
        """SHA-256 over the canonical JSON form of every setting that shapes output."""
        blob = json.dumps(_plain(replace(self, source="")), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _plain(x):
    if is_dataclass(x):
        return {k: _plain(v) for k, v in asdict(x).items()}
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _section(cls, d: dict | None, name: str):
    d = dict(d or {})
    known = set(cls.__dataclass_fields__)
    bad = set(d) - known
    if bad:
        raise ConfigError(f"[{name}] unknown keys: {sorted(bad)}")
    return cls(**d)


def _noise(d: dict | None) -> NoiseProfile:
    d = dict(d or {})
    miss = {}
    for c in ObjClass:
        if c.label in d:
            miss[c] = MissCurve(**d.pop(c.label))
    for k in ("fp_side_px", "fp_confidence"):
        if k in d:
            d[k] = tuple(d[k])
    try:
        return NoiseProfile(miss=miss, **d)
    except TypeError as e:
        raise ConfigError(f"[noise] {e}") from None


def _camera(d: dict | None) -> Camera:
    d = dict(d or {})
    if "crop" in d:
        d["crop"] = CropSpec(**d["crop"])
    return _section(Camera, d, "camera")


def from_dict(doc: dict, source: str = "<dict>", base: Path | None = None) -> RunConfig:
    doc = dict(doc)
    known = {"seed", "scene", "camera", "noise", "latency", "tracker", "analytics", "anonymize", "radar",
             "mask", "calibration"}
    bad = set(doc) - known
    if bad:
        raise ConfigError(f"unknown top-level keys: {sorted(bad)}")
    seed = int(doc.get("seed", 0))
    try:
        scene = scene_config_from_dict({**doc.get("scene", {}), "seed": seed})
    except (InvalidConfig, TypeError) as e:
        raise ConfigError(f"[scene] {e}") from None

    def resolve(p):
        if p is None:
            return None
        q = Path(p)
        if not q.is_absolute() and base is not None:
            q = base / q
        if not q.exists():
            raise ConfigError(f"referenced file does not exist: {q}")
        return str(q)

    cfg = RunConfig(
        seed=seed,
        scene=scene,
        camera=_camera(doc.get("camera")),
        noise=_noise(doc.get("noise")),
        latency=_section(LatencyConfig, doc.get("latency"), "latency"),
        tracker=_section(TrackerConfig, doc.get("tracker"), "tracker"),
        analytics=_section(AnalyticsConfig, doc.get("analytics"), "analytics"),
        anonymize=_section(AnonymizeConfig, doc.get("anonymize"), "anonymize"),
        radar=_section(RadarConfig, doc.get("radar"), "radar"),
        mask_path=resolve(doc.get("mask")),
        calibration_path=resolve(doc.get("calibration")),
        source=source,
    )
    if cfg.radar.sink not in ("udp", "file", "memory"):
        raise ConfigError(f"[radar] sink must be udp or file, got {cfg.radar.sink!r}")
    return cfg


def merge(base: dict, over: dict) -> dict:
    """Recursive table overlay; scalars and arrays in ``over`` replace those in ``base``."""
    out = dict(base)
    for k, v in over.items():
        out[k] = merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def _bundled_doc(name: str) -> dict:
    ref = resources.files("intersection_edge") / "configs" / f"{name}.toml"
    if not ref.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    with ref.open("rb") as fh:
        return tomllib.load(fh)


def load(path: str | Path) -> RunConfig:
    """Load a TOML file laid over the bundled paper-default values.

    A top-level ``base = "<bundled name>"`` picks a different base;
    ``base = ""`` starts from the built-in dataclass defaults instead.
    """
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: {e}") from None
    base = doc.pop("base", "paper-default")
    if base:
        doc = merge(_bundled_doc(base), doc)
    return from_dict(doc, str(p), p.parent)


def bundled(name: str = "paper-default") -> RunConfig:
    return from_dict(_bundled_doc(name), f"bundled:{name}")


def bundled_names() -> list[str]:
    d = resources.files("intersection_edge") / "configs"
    return sorted(p.name[:-5] for p in d.iterdir() if p.name.endswith(".toml"))
