# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Confusion matrices and IoU / mIoU evaluation.

Counts are unsigned 64-bit integers: a full video training set (roughly
200k frames of 480 x 853 pixels) overflows 32 bits. Matrices from separate
frames merge by integer addition, so evaluation split across workers gives
exactly the serial result.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .errors import ClassOutOfRange, EmptyMatrix, ShapeMismatch, ValidationError
from .tensors import IGNORE_LABEL, LabelMap


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts; entry (i, j) = pixels with ground truth i predicted as j."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeMismatch(f"confusion matrix must be K x K, got shape {arr.shape}")
        if arr.size and np.any(arr < 0):
            raise ValidationError("confusion counts must be non-negative")
        out = np.array(arr, dtype=np.uint64, copy=True)
        out.setflags(write=False)
        object.__setattr__(self, "counts", out)

    @classmethod
    def zeros(cls, num_classes: int) -> "ConfusionMatrix":
        if num_classes < 1:
            raise ValidationError("a confusion matrix needs at least one class")
        return cls(np.zeros((num_classes, num_classes), dtype=np.uint64))

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum(dtype=np.uint64))

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return merge(self, other)

    def trimmed(self, num_classes: int) -> "ConfusionMatrix":
        """Drop trailing classes; they must hold no counts."""
        if num_classes > self.num_classes:
            raise ValidationError(f"cannot grow a {self.num_classes}-class matrix to {num_classes}")
        rest = self.counts.copy()
        rest[:num_classes, :num_classes] = 0
        if rest.any():
            raise ValidationError(f"classes >= {num_classes} hold counts")
        return ConfusionMatrix(self.counts[:num_classes, :num_classes])

    def largest_class(self) -> int:
        """Highest class id with a non-zero row or column, or -1."""
        used = (self.counts.sum(axis=0) + self.counts.sum(axis=1)) > 0
        ids = np.flatnonzero(used)
        return int(ids[-1]) if ids.size else -1


def frame_confusion(gt: LabelMap, pred: LabelMap, num_classes: int) -> ConfusionMatrix:
    """Confusion matrix of a single frame."""
    if gt.shape != pred.shape:
        raise ShapeMismatch(f"ground truth {gt.shape} and prediction {pred.shape} differ in size")
    gt.check_classes(num_classes)
    valid = gt.data != IGNORE_LABEL
    # predictions under ignored pixels are not range-checked
    guess = pred.data[valid].astype(np.int64)
    if np.any(guess >= num_classes):
        value = int(guess[guess >= num_classes][0])
        raise ClassOutOfRange(f"predicted value {value} is not a class id < {num_classes}")
    index = num_classes * gt.data[valid].astype(np.int64) + guess
    counts = np.bincount(index, minlength=num_classes * num_classes)
    return ConfusionMatrix(counts.reshape(num_classes, num_classes).astype(np.uint64))


def accumulate(cm: ConfusionMatrix, gt: LabelMap, pred: LabelMap) -> ConfusionMatrix:
    """Add one frame's pixels; ground-truth 255 pixels are skipped entirely."""
    return merge(cm, frame_confusion(gt, pred, cm.num_classes))


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    if a.counts.shape != b.counts.shape:
        raise ShapeMismatch(f"cannot merge {a.num_classes}-class and {b.num_classes}-class matrices")
    return ConfusionMatrix(a.counts + b.counts)


def merge_all(matrices: Iterable[ConfusionMatrix], num_classes: int) -> ConfusionMatrix:
    total = ConfusionMatrix.zeros(num_classes)
    for cm in matrices:
        total = merge(total, cm)
    return total


@dataclass(frozen=True)
class IouResult:
    """Per-class IoU (None where the class has an empty union) and their mean."""

    per_class_iou: Tuple[Optional[float], ...]
    mean_iou: float

    @property
    def present_classes(self) -> Tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.per_class_iou) if v is not None)


def miou(cm: ConfusionMatrix) -> IouResult:
    """IoU_i = C_ii / (row_i + col_i - C_ii), averaged over classes with a non-zero union."""
    counts = cm.counts
    inter = np.diag(counts).astype(np.float64)
    union = counts.sum(axis=1).astype(np.float64) + counts.sum(axis=0).astype(np.float64) - inter
    present = union > 0
    if not np.any(present):
        raise EmptyMatrix("no class has a non-zero union; nothing to evaluate")
    per_class = tuple(float(inter[i] / union[i]) if present[i] else None for i in range(cm.num_classes))
    values = [v for v in per_class if v is not None]
    return IouResult(per_class, float(sum(values) / len(values)))


def pixel_accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total
    if total == 0:
        raise EmptyMatrix("confusion matrix holds no pixels")
    return float(int(np.trace(cm.counts)) / total)


@dataclass(frozen=True)
class GroupedIou:
    per_group: Dict[str, float]
    empty_groups: Tuple[str, ...]
    mean_iou: float


def mean_of_groups(per_group: Mapping[str, ConfusionMatrix]) -> GroupedIou:
    """mIoU per group (e.g. per video), then the plain mean over groups."""
    scores: Dict[str, float] = {}
    empty = []
    for name in sorted(per_group):
        try:
            scores[name] = miou(per_group[name]).mean_iou
        except EmptyMatrix:
            empty.append(name)
    if not scores:
        raise EmptyMatrix("every group is empty")
    return GroupedIou(scores, tuple(empty), float(sum(scores.values()) / len(scores)))


def coverage(gt: LabelMap) -> float:
    """Fraction of annotated (non-255) pixels; an empty map has coverage 0."""
    size = gt.data.size
    if size == 0:
        return 0.0
    return float(int(np.count_nonzero(gt.data != IGNORE_LABEL)) / size)
