# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Run logger setup."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Optional

from .logging_jsonl import JsonlLogger

LOG_PATH_ENV = "SEGFUSE_LOG_FILE_PATH"


def resolve_log_path(log_path: Optional[Path]) -> Optional[Path]:
    """--log-path, then SEGFUSE_LOG_FILE_PATH, else no log."""
    if log_path is not None:
        return log_path
    env_log_path = os.getenv(LOG_PATH_ENV)
    return Path(env_log_path) if env_log_path else None


class RunLog:
    """Event sink for one CLI run; silently drops events when no log is configured."""

    def __init__(self, logger: Optional[JsonlLogger] = None) -> None:
        self.logger = logger

    @property
    def enabled(self) -> bool:
        return self.logger is not None

    def event(self, ev: str, **fields: Any) -> None:
        if self.logger is not None:
            self.logger.event(ev, **fields)

    def close(self) -> None:
        if self.logger is not None:
            self.logger.close()


def setup_run_logger(log_path: Optional[Path] = None) -> RunLog:
    """Open (and truncate) the run log if one is configured."""
    path = resolve_log_path(log_path)
    if path is None:
        return RunLog()
    logger = JsonlLogger(path.expanduser())
    logger.start_fresh()
    return RunLog(logger)
