"""Deterministic synthetic intersection traffic with exact ground truth."""

from .camera import Camera, TruthRegion, project_frame, project_to_pixels, sensitive_regions
from .generate import (
    FrameTruth,
    GroundTruthObject,
    IncompleteRoute,
    InvalidConfig,
    RouteInfo,
    Scene,
    SceneConfig,
    ScriptedObject,
    generate,
    truth_turn_label,
)
from .layout import ARMS, MOVEMENTS, TURN_TABLE, Layout, turn_label

__all__ = [
    "ARMS",
    "MOVEMENTS",
    "TURN_TABLE",
    "Camera",
    "FrameTruth",
    "GroundTruthObject",
    "IncompleteRoute",
    "InvalidConfig",
    "Layout",
    "RouteInfo",
    "Scene",
    "SceneConfig",
    "ScriptedObject",
    "TruthRegion",
    "generate",
    "project_frame",
    "project_to_pixels",
    "sensitive_regions",
    "truth_turn_label",
    "turn_label",
]
