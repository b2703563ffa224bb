# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Class-imbalance losses over per-pixel softmax probabilities.

Three losses are provided, each returning the mean over non-ignored pixels
and the analytic gradient with respect to the pre-softmax logits:

    weighted_ce               -w[y] ln p_y
    pixel_distribution_loss   -max(w[y], w[y']) ln p_y
    confusion_focal_loss      -f(y, y') (1 - p_y)^2 ln p_y,
                              f = C[y, y'] / max(1, min(C[y, y], C[y', y']))

y is the ground truth, y' the argmax prediction (lowest index on ties).
Every weight factor is a constant for differentiation; the focal term
(1 - p)^2 is differentiated in full.

Computation is float64. Pixel contributions are reduced with ``math.fsum``,
which is exactly rounded and therefore independent of summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .class_weights import ClassWeights
from .errors import (
    AllIgnored,
    ClassOutOfRange,
    MissingConfusion,
    MissingWeights,
    ShapeMismatch,
    ValidationError,
)
from .metrics import ConfusionMatrix
from .tensors import IGNORE_LABEL, LabelMap

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LossBatch:
    """Logits (K x H x W) with ground truth and optional weighting inputs."""

    logits: np.ndarray
    gt: LabelMap
    weights: Optional[ClassWeights] = None
    confusion: Optional[ConfusionMatrix] = None

    def __post_init__(self) -> None:
        logits = np.array(self.logits, dtype=np.float64, copy=True)
        if logits.ndim != 3:
            raise ShapeMismatch(f"logits must be K x H x W, got shape {logits.shape}")
        if not np.all(np.isfinite(logits)):
            raise ValidationError("logits must be finite")
        k = logits.shape[0]
        if logits.shape[1:] != self.gt.shape:
            raise ShapeMismatch(f"logits {logits.shape[1:]} and ground truth {self.gt.shape} differ in size")
        self.gt.check_classes(k)
        if self.weights is not None and self.weights.num_classes != k:
            raise ShapeMismatch(f"{self.weights.num_classes} class weights for {k} classes")
        if self.confusion is not None and self.confusion.num_classes != k:
            raise ShapeMismatch(f"{self.confusion.num_classes}-class confusion matrix for {k} classes")
        logits.setflags(write=False)
        object.__setattr__(self, "logits", logits)

    @property
    def num_classes(self) -> int:
        return int(self.logits.shape[0])

    def with_logits(self, logits: np.ndarray) -> "LossBatch":
        return LossBatch(logits, self.gt, self.weights, self.confusion)


@dataclass(frozen=True)
class LossResult:
    """Mean loss and its gradient with respect to the logits.

    ``grad`` stays float64 so finite-difference checks keep their precision;
    ``grad_f32`` is the K x H x W f32 tensor that gets written to disk.
    """

    value: float
    grad: np.ndarray = field(repr=False)
    counted_pixels: int

    @property
    def grad_f32(self) -> np.ndarray:
        return self.grad.astype(np.float32)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Channel softmax of a K x H x W volume with per-pixel max subtraction."""
    z = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=0, keepdims=True)


@dataclass(frozen=True)
class _Pixels:
    """Flattened view of the counted pixels of a batch."""

    probs: np.ndarray      # K x N over all pixels
    valid: np.ndarray      # N bool
    gt: np.ndarray         # M class ids of counted pixels
    pred: np.ndarray       # M argmax ids of counted pixels
    p_gt: np.ndarray       # M probabilities of the true class
    onehot: np.ndarray     # K x M

    @property
    def count(self) -> int:
        return int(self.gt.size)


def _prepare(batch: LossBatch) -> _Pixels:
    k = batch.num_classes
    probs = softmax(batch.logits).reshape(k, -1)
    labels = batch.gt.data.reshape(-1)
    valid = labels != IGNORE_LABEL
    if not np.any(valid):
        raise AllIgnored("every pixel carries the ignore label")
    gt = labels[valid].astype(np.int64)
    counted = probs[:, valid]
    pred = np.argmax(counted, axis=0)
    p_gt = counted[gt, np.arange(gt.size)]
    onehot = np.zeros_like(counted)
    onehot[gt, np.arange(gt.size)] = 1.0
    return _Pixels(probs, valid, gt, pred, p_gt, onehot)


def _finish(batch: LossBatch, px: _Pixels, per_pixel: np.ndarray, grad_counted: np.ndarray) -> LossResult:
    n = px.count
    value = math.fsum(per_pixel.tolist()) / n
    grad = np.zeros_like(px.probs)
    grad[:, px.valid] = grad_counted / n
    return LossResult(value, grad.reshape(batch.logits.shape), n)


def _weighted(batch: LossBatch, factor: np.ndarray, px: _Pixels) -> LossResult:
    log_p = np.log(np.maximum(px.p_gt, PROB_FLOOR))
    per_pixel = -factor * log_p
    grad = factor[None, :] * (px.probs[:, px.valid] - px.onehot)
    return _finish(batch, px, per_pixel, grad)


def weighted_ce(batch: LossBatch) -> LossResult:
    """Class-weighted cross entropy, mean over non-ignored pixels."""
    if batch.weights is None:
        raise MissingWeights("weighted_ce needs class weights")
    px = _prepare(batch)
    w = batch.weights.as_array()
    return _weighted(batch, w[px.gt], px)


def pixel_distribution_loss(batch: LossBatch) -> LossResult:
    """Cross entropy weighted by the larger of the true and predicted class weights."""
    if batch.weights is None:
        raise MissingWeights("pixel_distribution_loss needs class weights")
    px = _prepare(batch)
    w = batch.weights.as_array()
    return _weighted(batch, np.maximum(w[px.gt], w[px.pred]), px)


def confusion_factors(confusion: ConfusionMatrix, gt: np.ndarray, pred: np.ndarray) -> np.ndarray:
    """C[y, y'] / max(1, min(C[y, y], C[y', y'])) per pixel."""
    c = confusion.counts.astype(np.float64)
    diag = np.diag(c)
    denom = np.maximum(1.0, np.minimum(diag[gt], diag[pred]))
    return c[gt, pred] / denom


def confusion_focal_loss(batch: LossBatch) -> LossResult:
    """Focal loss (exponent 2) scaled by confusion-matrix factors."""
    if batch.confusion is None:
        raise MissingConfusion("confusion_focal_loss needs a validation confusion matrix")
    px = _prepare(batch)
    f = confusion_factors(batch.confusion, px.gt, px.pred)
    p = px.p_gt
    log_p = np.log(np.maximum(p, PROB_FLOOR))
    q = 1.0 - p
    per_pixel = -f * q * q * log_p
    # d/dz_k [-(1-p)^2 ln p] = [(1-p)^2 - 2 p (1-p) ln p] (p_k - [k == y])
    scale = f * (q * q - 2.0 * p * q * log_p)
    grad = scale[None, :] * (px.probs[:, px.valid] - px.onehot)
    return _finish(batch, px, per_pixel, grad)


LOSSES: dict[str, Callable[[LossBatch], LossResult]] = {
    "weighted-ce": weighted_ce,
    "pixel-distribution": pixel_distribution_loss,
    "confusion-focal": confusion_focal_loss,
}


@dataclass(frozen=True)
class GradientCheck:
    max_rel_error: float
    checked: int
    skipped: int


def _pixel_batch(batch: LossBatch, column: np.ndarray, row: int, col: int) -> LossBatch:
    """One-pixel batch holding ``column`` as the logits of pixel (row, col)."""
    gt = LabelMap(batch.gt.data[row:row + 1, col:col + 1])
    return LossBatch(column.reshape(-1, 1, 1), gt, batch.weights, batch.confusion)


def gradient_check(loss_fn: Callable[[LossBatch], LossResult], batch: LossBatch,
                   eps: float = 1e-3, floor: float = 1e-6, samples: Optional[int] = None,
                   seed: int = 0) -> GradientCheck:
    """Compare the analytic gradient with central finite differences.

    Moving logit (k, r, c) only changes the term of pixel (r, c), so each
    difference is taken on that pixel alone and divided by the counted
    pixel count. Entries whose move changes the pixel's argmax are skipped:
    the weight factors are piecewise constant in the prediction and have no
    derivative across a tie. The relative error of an entry is
    |a - n| / max(|a|, |n|, floor).

    ``samples`` limits the check to that many entries drawn without
    replacement from a generator seeded with ``seed``.
    """
    if samples is not None and samples < 1:
        raise ValidationError(f"gradient check samples must be at least 1, got {samples}")
    result = loss_fn(batch)
    analytic = result.grad
    n = result.counted_pixels
    shape = batch.logits.shape
    total = int(np.prod(shape))
    flat = np.arange(total)
    if samples is not None and samples < total:
        flat = np.sort(np.random.default_rng(seed).choice(total, size=samples, replace=False))
    worst = 0.0
    checked = skipped = 0
    for k, row, col in zip(*np.unravel_index(flat, shape)):
        k, row, col = int(k), int(row), int(col)
        ignored = batch.gt.data[row, col] == IGNORE_LABEL
        column = batch.logits[:, row, col]
        plus = column.copy()
        minus = column.copy()
        plus[k] += eps
        minus[k] -= eps
        base = int(np.argmax(column))
        if not ignored and (int(np.argmax(plus)) != base or int(np.argmax(minus)) != base):
            skipped += 1
            continue
        if ignored:
            numeric = 0.0
        else:
            up = loss_fn(_pixel_batch(batch, plus, row, col)).value
            down = loss_fn(_pixel_batch(batch, minus, row, col)).value
            numeric = (up - down) / (2 * eps) / n
        a = float(analytic[k, row, col])
        err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        worst = max(worst, err)
        checked += 1
    return GradientCheck(worst, checked, skipped)
