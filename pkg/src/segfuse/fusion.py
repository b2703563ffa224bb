# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Fusion of soft predictions.

- fuse_tta:      average the outputs of several test-time transforms
- aggregate:     P = gamma * P_s + (1 - gamma) * P_v
- gamma_search:  grid search for the gamma maximising validation mIoU

Everything operates on probabilities, never on logits. Arithmetic is done in
float64 and rounded to float32 once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image as PILImage

from .errors import ClassCountMismatch, EmptyDataset, EmptyList, ShapeMismatch, ValidationError
from .metrics import ConfusionMatrix, miou
from .tensors import IGNORE_LABEL, LabelMap, SoftPrediction
from .worker_pool import WorkerPool

DEFAULT_GRID_STEP = 0.01


@dataclass(frozen=True)
class TtaSpec:
    """Scales and flip setting of a test-time augmentation run."""

    scales: Tuple[float, ...] = (0.5, 1.0, 1.5)
    flip: bool = True

    def __post_init__(self) -> None:
        scales = tuple(float(s) for s in self.scales)
        if not scales:
            raise ValidationError("TTA needs at least one scale")
        if any(not math.isfinite(s) or s <= 0 for s in scales):
            raise ValidationError(f"TTA scales must be positive, got {scales}")
        object.__setattr__(self, "scales", scales)

    @classmethod
    def preset(cls, name: str) -> "TtaSpec":
        try:
            return TTA_PRESETS[name]
        except KeyError:
            raise ValidationError(f"unknown TTA preset {name!r}; choose from {', '.join(TTA_PRESETS)}") from None

    def transforms(self) -> List[Tuple[float, bool]]:
        """(scale, flipped) pairs an inference run has to produce."""
        out: List[Tuple[float, bool]] = []
        for s in self.scales:
            out.append((s, False))
            if self.flip:
                out.append((s, True))
        return out


# The volo model degrades under multi-scale input, so it is only flipped.
TTA_PRESETS = {
    "swin": TtaSpec((0.5, 1.0, 1.5), True),
    "volo": TtaSpec((1.0,), True),
}


@dataclass(frozen=True)
class AggregationSpec:
    gamma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and 0.0 <= self.gamma <= 1.0):
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma}")


def normalize(p: SoftPrediction) -> SoftPrediction:
    """Rescale every pixel to sum 1; all-zero pixels become uniform."""
    data = p.data.astype(np.float64)
    sums = data.sum(axis=0, keepdims=True)
    zero = sums == 0
    data = np.where(zero, 1.0 / p.num_classes, data / np.where(zero, 1.0, sums))
    return SoftPrediction(data.astype(np.float32))


def _resize_channels(data: np.ndarray, height: int, width: int) -> np.ndarray:
    if data.shape[1:] == (height, width):
        return data
    planes = [
        np.asarray(PILImage.fromarray(np.ascontiguousarray(plane)).resize((width, height),
                                                                        PILImage.Resampling.BILINEAR))
        for plane in data
    ]
    return np.stack(planes).astype(np.float32)


def fuse_tta(preds: Sequence[Tuple[SoftPrediction, float, bool]], base_h: int, base_w: int) -> SoftPrediction:
    """Average TTA outputs at the base resolution.

    Each prediction is un-flipped when flagged and bilinearly resized per
    channel. The per-entry mean sorts the stacked values before summing, so
    the result does not depend on the order of ``preds``.
    """
    if not preds:
        raise EmptyList("fuse_tta needs at least one prediction")
    if base_h < 1 or base_w < 1:
        raise ValidationError(f"base size must be positive, got ({base_h}, {base_w})")
    k = preds[0][0].num_classes
    aligned = []
    for p, scale, flipped in preds:
        if p.num_classes != k:
            raise ClassCountMismatch(f"TTA inputs disagree on class count: {k} and {p.num_classes}")
        if not (math.isfinite(scale) and scale > 0):
            raise ValidationError(f"TTA scale must be positive, got {scale}")
        data = p.data[:, :, ::-1] if flipped else p.data
        aligned.append(_resize_channels(data, base_h, base_w).astype(np.float64))
    stacked = np.sort(np.stack(aligned), axis=0)
    mean = stacked.sum(axis=0) / len(aligned)
    return normalize(SoftPrediction(mean.astype(np.float32), normalized=False))


def _check_pair(ps: SoftPrediction, pv: SoftPrediction) -> None:
    if ps.shape != pv.shape:
        raise ShapeMismatch(f"predictions differ in shape: {ps.shape} and {pv.shape}")


def _combine(ps: np.ndarray, pv: np.ndarray, gamma: float) -> np.ndarray:
    mixed = gamma * ps.astype(np.float64) + (1.0 - gamma) * pv.astype(np.float64)
    return mixed.astype(np.float32)


def aggregate(ps: SoftPrediction, pv: SoftPrediction, spec: AggregationSpec) -> SoftPrediction:
    """Per-entry convex combination gamma * ps + (1 - gamma) * pv."""
    _check_pair(ps, pv)
    return SoftPrediction(_combine(ps.data, pv.data, spec.gamma), normalized=ps.normalized and pv.normalized)


def score_threshold_report(p: SoftPrediction) -> np.ndarray:
    """Per-pixel maximum probability (H x W float32)."""
    return p.data.max(axis=0)


# -----------------------------------------------------------------------------
# Gamma search
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaSearchResult:
    gamma: float
    miou: float
    curve: Tuple[Tuple[float, float], ...]


def gamma_grid(step: float) -> List[float]:
    """0, step, 2*step, ... up to 1 inclusive."""
    if not (math.isfinite(step) and 0.0 < step <= 0.5):
        raise ValidationError(f"grid step must lie in (0, 0.5], got {step}")
    n = int(math.floor(1.0 / step + 1e-9))
    grid = [min(1.0, round(i * step, 12)) for i in range(n + 1)]
    if grid[-1] < 1.0:
        grid.append(1.0)
    return grid


def _frame_curve(ps: SoftPrediction, pv: SoftPrediction, gt: LabelMap, grid: Sequence[float]) -> np.ndarray:
    """Confusion counts of one frame for every gamma: G x K x K uint64."""
    _check_pair(ps, pv)
    if ps.data.shape[1:] != gt.shape:
        raise ShapeMismatch(f"prediction {ps.data.shape[1:]} and ground truth {gt.shape} differ in size")
    k = ps.num_classes
    gt.check_classes(k)
    labels = gt.data.reshape(-1)
    valid = labels != IGNORE_LABEL
    truth = labels[valid].astype(np.int64)
    out = np.zeros((len(grid), k, k), dtype=np.uint64)
    for g, gamma in enumerate(grid):
        pred = np.argmax(_combine(ps.data, pv.data, gamma), axis=0).reshape(-1)[valid]
        counts = np.bincount(truth * k + pred, minlength=k * k)
        out[g] = counts.reshape(k, k).astype(np.uint64)
    return out


FrameLoader = Callable[[], Tuple[SoftPrediction, SoftPrediction, LabelMap]]


def _sum_counts(acc: Optional[np.ndarray], counts: np.ndarray) -> np.ndarray:
    if acc is None:
        return counts
    if acc.shape != counts.shape:
        raise ClassCountMismatch(f"frames disagree on class count: {acc.shape[1]} and {counts.shape[1]}")
    acc += counts
    return acc


def gamma_search_frames(frames: Sequence[FrameLoader], grid_step: float = DEFAULT_GRID_STEP,
                        threads: Optional[int] = None,
                        on_done: Optional[Callable[[int, int], None]] = None) -> GammaSearchResult:
    """Return the gamma with the highest validation mIoU.

    Each frame is loaded and scored by a worker; only its per-gamma confusion
    counts are kept, summed in frame order. Ties go to the smaller gamma.
    """
    if not frames:
        raise EmptyDataset("gamma search needs at least one frame")
    grid = gamma_grid(grid_step)
    pool = WorkerPool(threads, on_done=on_done)
    totals = pool.map_reduce(lambda load: _frame_curve(*load(), grid), frames, _sum_counts, None)

    curve = []
    best_gamma, best_miou = grid[0], -1.0
    for gamma, counts in zip(grid, totals):
        value = miou(ConfusionMatrix(counts)).mean_iou
        curve.append((gamma, value))
        if value > best_miou:
            best_gamma, best_miou = gamma, value
    return GammaSearchResult(best_gamma, best_miou, tuple(curve))


def gamma_search(ps_set: Sequence[SoftPrediction], pv_set: Sequence[SoftPrediction], gts: Sequence[LabelMap],
                 grid_step: float = DEFAULT_GRID_STEP, threads: Optional[int] = None,
                 on_done: Optional[Callable[[int, int], None]] = None) -> GammaSearchResult:
    """gamma_search_frames over frames already in memory."""
    if not (len(ps_set) == len(pv_set) == len(gts)):
        raise ValidationError(
            f"frame lists differ in length: {len(ps_set)} P_s, {len(pv_set)} P_v, {len(gts)} ground truth")
    k = ps_set[0].num_classes if ps_set else 0
    for p in list(ps_set) + list(pv_set):
        if p.num_classes != k:
            raise ClassCountMismatch(f"predictions disagree on class count: {k} and {p.num_classes}")
    frames: List[FrameLoader] = [
        (lambda frame=frame: frame) for frame in zip(ps_set, pv_set, gts)
    ]
    return gamma_search_frames(frames, grid_step, threads, on_done)
