"""SORT-style multiple object tracking and CLEAR-MOT evaluation."""

from .assoc import associate, solve_assignment
from .io import read_tracks, write_tracks
from .kalman import KalmanState, SingularInnovation, initiate, predict, update
from .mota import MotaResult, evaluate_mota, mota_from_counts
from .sort import OutOfOrderFrame, Status, Track, Tracker, TrackerConfig, TrackSnapshot, run_tracker

__all__ = [
    "KalmanState",
    "MotaResult",
    "OutOfOrderFrame",
    "SingularInnovation",
    "Status",
    "Track",
    "TrackSnapshot",
    "Tracker",
    "TrackerConfig",
    "associate",
    "evaluate_mota",
    "initiate",
    "mota_from_counts",
    "predict",
    "read_tracks",
    "run_tracker",
    "solve_assignment",
    "update",
    "write_tracks",
]
