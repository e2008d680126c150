"""Configuration, stage orchestration, reports and the command line."""

from .config import ConfigError, RunConfig, bundled, from_dict, load
from .report import report
from .stages import STAGES, Context, MissingLog, StageError, run, run_stage

__all__ = [
    "ConfigError",
    "Context",
    "MissingLog",
    "RunConfig",
    "STAGES",
    "StageError",
    "bundled",
    "from_dict",
    "load",
    "report",
    "run",
    "run_stage",
]
