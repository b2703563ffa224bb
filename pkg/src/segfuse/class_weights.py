# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Class weights from training-set pixel statistics.

w_i = sqrt(n_i / mu_n) where n_i counts the training pixels of class i and
mu_n is the mean of all K counts, zero counts included. Ratios are taken on
Python integers (n_i * K / total) so the weights do not change, even in the
last bit, when every count is scaled by the same factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .errors import AllZeroCounts, ShapeMismatch, ValidationError
from .tensors import IGNORE_LABEL, LabelMap


@dataclass(frozen=True)
class PixelCounts:
    counts: Tuple[int, ...]

    def __post_init__(self) -> None:
        values = tuple(int(c) for c in self.counts)
        if not values:
            raise ValidationError("pixel counts need at least one class")
        if any(c < 0 for c in values):
            raise ValidationError("pixel counts must be non-negative")
        object.__setattr__(self, "counts", values)

    @property
    def num_classes(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def mean(self) -> float:
        return self.total / self.num_classes

    def absent_classes(self) -> Tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.counts) if c == 0)

    def __add__(self, other: "PixelCounts") -> "PixelCounts":
        if self.num_classes != other.num_classes:
            raise ShapeMismatch(f"cannot add {self.num_classes}-class and {other.num_classes}-class counts")
        return PixelCounts(tuple(a + b for a, b in zip(self.counts, other.counts)))


@dataclass(frozen=True)
class ClassWeights:
    weights: Tuple[float, ...]

    def __post_init__(self) -> None:
        values = tuple(float(w) for w in self.weights)
        if any(not math.isfinite(w) or w < 0 for w in values):
            raise ValidationError("class weights must be finite and non-negative")
        object.__setattr__(self, "weights", values)

    @property
    def num_classes(self) -> int:
        return len(self.weights)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)


def frame_counts(lbl: LabelMap, num_classes: int) -> PixelCounts:
    lbl.check_classes(num_classes)
    valid = lbl.data[lbl.data != IGNORE_LABEL]
    return PixelCounts(tuple(np.bincount(valid, minlength=num_classes).tolist()))


def count_pixels(maps: Iterable[LabelMap], num_classes: int) -> PixelCounts:
    """Exact per-class pixel counts over a sequence of label maps, ignoring 255."""
    total = PixelCounts((0,) * num_classes)
    for lbl in maps:
        total = total + frame_counts(lbl, num_classes)
    return total


def compute_weights(n: PixelCounts) -> ClassWeights:
    total = n.total
    if total == 0:
        raise AllZeroCounts("every class count is zero; weights are undefined")
    k = n.num_classes
    return ClassWeights(tuple(math.sqrt(c * k / total) for c in n.counts))
