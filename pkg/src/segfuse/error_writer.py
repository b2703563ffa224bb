# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Timestamped error blocks on stderr."""

import sys
from datetime import datetime, timezone
from typing import Optional

from .utils import to_iso8601_basic


def write_stderr_error(error_type: str, error_msg: str, details: Optional[dict] = None) -> None:
    """Write one error block to stderr.

    Args:
        error_type: Exception class name (e.g. "BadMagic", "PairingError")
        error_msg: The error message
        details: Optional extra key/value lines
    """
    timestamp = to_iso8601_basic(datetime.now(timezone.utc))
    lines = [f"{timestamp} | ERROR | {error_type} | {error_msg}"]
    for key, value in (details or {}).items():
        lines.append(f"{timestamp} | ERROR | {key}: {value}")
    sys.stderr.write("\n".join(lines) + "\n")
    sys.stderr.flush()
