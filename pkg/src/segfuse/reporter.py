# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Aligned text reports and CSV rendering for the CLI."""

from __future__ import annotations

import csv
import io
from typing import Iterable, List, Sequence

from tabulate import tabulate

from .class_weights import ClassWeights, PixelCounts
from .metrics import GroupedIou, IouResult
from .utils import fmt_float


def iou_table(result: IouResult) -> str:
    rows = [(i, fmt_float(v)) for i, v in enumerate(result.per_class_iou)]
    return tabulate(rows, headers=("class", "IoU"), tablefmt="simple", colalign=("right", "right"),
                    disable_numparse=True)


def group_table(grouped: GroupedIou) -> str:
    rows = [(name, fmt_float(value)) for name, value in grouped.per_group.items()]
    rows += [(name, "empty") for name in grouped.empty_groups]
    return tabulate(rows, headers=("group", "mIoU"), tablefmt="simple", colalign=("left", "right"),
                    disable_numparse=True)


def weights_table(counts: PixelCounts, weights: ClassWeights) -> str:
    rows = [(i, c, fmt_float(w)) for i, (c, w) in enumerate(zip(counts.counts, weights.weights))]
    return tabulate(rows, headers=("class", "pixels", "weight"), tablefmt="simple",
                    colalign=("right", "right", "right"), disable_numparse=True)


def summary_table(pairs: Sequence[tuple]) -> str:
    return tabulate(pairs, tablefmt="plain", colalign=("left", "right"))


def csv_text(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    """Comma-separated text with a header row, quoted where a field needs it."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def iou_csv(result: IouResult) -> str:
    rows: List[Sequence[object]] = [(i, fmt_float(v)) for i, v in enumerate(result.per_class_iou)]
    rows.append(("miou", fmt_float(result.mean_iou)))
    return csv_text(("class_id", "iou"), rows)


def weights_csv(counts: PixelCounts, weights: ClassWeights) -> str:
    rows = [(i, c, fmt_float(w)) for i, (c, w) in enumerate(zip(counts.counts, weights.weights))]
    return csv_text(("class_id", "count", "weight"), rows)


def curve_csv(curve: Sequence[tuple]) -> str:
    return csv_text(("gamma", "miou"), [(fmt_float(g), fmt_float(m)) for g, m in curve])


def coverage_csv(rows: Iterable[tuple]) -> str:
    """Rows of (image_path, label_path, tag, coverage or None, status)."""
    rendered = [(img, lbl, tag, fmt_float(cov) if cov is not None else "", status)
                for img, lbl, tag, cov, status in rows]
    return csv_text(("image_path", "label_path", "tag", "coverage", "status"), rendered)

