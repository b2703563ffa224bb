# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Pixel and probability volume types.

All three types wrap a numpy array that is copied on construction and marked
read-only, so values can be shared between worker threads without locking.

Layouts:
    - Image:          uint8   H x W x 3 (RGB)
    - LabelMap:       uint8   H x W, 255 = ignore
    - SoftPrediction: float32 K x H x W, channel-major
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClassCountMismatch, ClassOutOfRange, ShapeMismatch, ValidationError

IGNORE_LABEL = 255
NORMALIZED_TOLERANCE = 1e-4


def _frozen(array: np.ndarray, dtype: type) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Image:
    """RGB image, uint8, row-major H x W x 3."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ShapeMismatch(f"image must be H x W x 3, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValidationError("image intensities must lie in [0, 255]")
        object.__setattr__(self, "data", _frozen(arr, np.uint8))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids, uint8, with 255 marking unannotated pixels."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ShapeMismatch(f"label map must be H x W, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValidationError("label values must lie in [0, 255]")
        object.__setattr__(self, "data", _frozen(arr, np.uint8))

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def check_classes(self, num_classes: int) -> None:
        """Raise ClassOutOfRange unless every value is < num_classes or 255."""
        bad = (self.data >= num_classes) & (self.data != IGNORE_LABEL)
        if np.any(bad):
            value = int(self.data[bad][0])
            raise ClassOutOfRange(f"label value {value} is not a class id < {num_classes}")


@dataclass(frozen=True)
class SoftPrediction:
    """Per-pixel class probabilities, float32, K x H x W.

    When ``normalized`` is set the per-pixel channel sums are checked to lie
    within 1e-4 of one.
    """

    data: np.ndarray
    normalized: bool = field(default=True)

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 3:
            raise ShapeMismatch(f"soft prediction must be K x H x W, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ClassCountMismatch("soft prediction needs at least one class")
        arr = _frozen(arr, np.float32)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValidationError("probabilities must be finite and non-negative")
        if self.normalized and arr.size:
            sums = arr.astype(np.float64).sum(axis=0)
            if np.any(np.abs(sums - 1.0) > NORMALIZED_TOLERANCE):
                raise ValidationError("soft prediction is flagged normalized but a pixel does not sum to 1")
        object.__setattr__(self, "data", arr)

    @property
    def num_classes(self) -> int:
        return int(self.data.shape[0])

    @property
    def height(self) -> int:
        return int(self.data.shape[1])

    @property
    def width(self) -> int:
        return int(self.data.shape[2])

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.num_classes, self.height, self.width)


def argmax_labels(p: SoftPrediction) -> LabelMap:
    """Harden a soft prediction to per-pixel class ids.

    Ties resolve to the lowest class id (``np.argmax`` returns the first
    maximum). At most 255 classes fit, since 255 is reserved for ignore.
    """
    if p.num_classes > IGNORE_LABEL:
        raise ClassCountMismatch(f"at most {IGNORE_LABEL} classes fit a label map, got {p.num_classes}")
    return LabelMap(np.argmax(p.data, axis=0).astype(np.uint8))
