# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Small formatting helpers shared by the CLI and reports."""

from __future__ import annotations

import math
from datetime import datetime, timezone
from typing import Optional


def to_iso8601_basic(dt: datetime) -> str:
    """Convert a timezone-aware datetime to ISO 8601 BASIC format (YYYYMMDDTHHMMSSZ).

    Raises:
        ValueError: If a naive datetime is provided

    Example:
        >>> from datetime import datetime, timezone
        >>> to_iso8601_basic(datetime(2025, 9, 20, 22, 3, 11, tzinfo=timezone.utc))
        '20250920T220311Z'
    """
    if dt.tzinfo is None:
        raise ValueError("Naive datetime provided; supply an aware datetime with tzinfo")
    return dt.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def fmt_float(value: Optional[float], decimals: int = 6) -> str:
    """Fixed-point text for CSV output; None and non-finite values become 'nan'."""
    if value is None or not math.isfinite(value):
        return "nan"
    return f"{value:.{decimals}f}"
