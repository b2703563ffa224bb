# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""JSON Lines (JSONL) logging for segfuse runs.

One JSON object per line, the ``ev`` key naming the event:

    {"ev": "run_start", "command": "eval", "threads": 8}
    {"ev": "frame_done", "index": 3, "total": 10, "name": "video_1/0003"}
    {"ev": "result", "miou": 0.5806}
    {"ev": "run_end", "exit_code": 0, "duration_ms": 1532}

The file is truncated when a run starts, so each log holds exactly one run.
Writes are serialised with a lock because worker threads report progress.
"""

from __future__ import annotations

import json
import math
import threading
from pathlib import Path
from typing import Any, Dict, Optional, TextIO, Union


def _jsonable(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item") and callable(value.item):
        # numpy scalars
        return _jsonable(value.item())
    return value


class JsonlLogger:
    """Logger that writes JSON objects to a file, one per line.

    Attributes:
        path: Path to the JSONL log file
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)
        self._file: Optional[TextIO] = None
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"<JsonlLogger {self.path.name}>"

    __str__ = __repr__

    def __enter__(self) -> "JsonlLogger":
        self.start_fresh()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.close()
        return False

    def start_fresh(self) -> None:
        """Create the parent directory and truncate the log file."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            if self._file:
                self._file.close()
            self._file = self.path.open("w", encoding="utf-8")

    def write(self, record: Dict[str, Any]) -> None:
        """Append one record and flush."""
        if not self._file:
            self.start_fresh()
        line = json.dumps({k: _jsonable(v) for k, v in record.items()}, ensure_ascii=False)
        with self._lock:
            assert self._file is not None
            self._file.write(line + "\n")
            self._file.flush()

    def event(self, ev: str, **fields: Any) -> None:
        self.write({"ev": ev, **fields})

    def close(self) -> None:
        with self._lock:
            if self._file:
                self._file.close()
                self._file = None
