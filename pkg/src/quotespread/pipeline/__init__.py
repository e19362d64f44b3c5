from .config import ConfigError, RunConfig
from .stages import (
    EXIT_CONFIG,
    EXIT_MISSING,
    EXIT_OK,
    EXIT_PARTIAL,
    StageResult,
    cmd_geo,
    cmd_ingest,
    cmd_match,
    cmd_report,
    cmd_temporal,
    run_all,
)

__all__ = [
    "EXIT_CONFIG",
    "EXIT_MISSING",
    "EXIT_OK",
    "EXIT_PARTIAL",
    "ConfigError",
    "RunConfig",
    "StageResult",
    "cmd_geo",
    "cmd_ingest",
    "cmd_match",
    "cmd_report",
    "cmd_temporal",
    "run_all",
]
