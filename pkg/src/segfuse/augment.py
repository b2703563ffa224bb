# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Seeded joint augmentation of an image and its label map.

Pipeline, in order:
    1. multi-scale resize  (alpha, beta1, beta2)
    2. random crop to (crop_h, crop_w), padding when smaller
    3. random horizontal flip
    4. metric distortion   (brightness, contrast, saturation, hue)

Every random value comes from a DrawSource. The production source, AugRng,
is a Philox counter-based generator keyed by (seed, image_index), so the draw
sequence of one image never depends on how many other images were processed
or on which worker thread runs it. Tests substitute a scripted source.

Geometric ops touch image and label identically. Labels are only ever
resampled with nearest neighbour, so no class id appears that was not
already present (apart from the 255 used for padding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Protocol, Tuple

import numpy as np
from PIL import Image as PILImage
from skimage.color import hsv2rgb, rgb2hsv

from .errors import ValidationError
from .tensors import IGNORE_LABEL, Image, LabelMap

SCALE_RANGE = (1.0, 2.0)
ASPECT_JITTER = 0.2
IMAGE_PAD_VALUE = 128

_SEED_MASK = (1 << 64) - 1


class DrawSource(Protocol):
    """Source of the random values consumed by the pipeline."""

    def uniform(self, low: float, high: float) -> float: ...

    def coin(self, p: float) -> bool: ...

    def randint(self, n: int) -> int:
        """Integer in [0, n)."""
        ...


class AugRng:
    """Deterministic draw source for one image.

    Keyed by (seed, image_index); the Philox counter advances with each draw.
    Every draw is recorded in ``draws`` for audit output.
    """

    def __init__(self, seed: int, image_index: int) -> None:
        if image_index < 0:
            raise ValidationError(f"image index must be non-negative, got {image_index}")
        key = np.array([seed & _SEED_MASK, image_index & _SEED_MASK], dtype=np.uint64)
        self.seed = seed
        self.image_index = image_index
        self._gen = np.random.Generator(np.random.Philox(key=key))
        self.draws: List[Tuple[str, float]] = []

    def uniform(self, low: float, high: float) -> float:
        value = float(self._gen.uniform(low, high))
        self.draws.append(("uniform", value))
        return value

    def coin(self, p: float) -> bool:
        value = bool(self._gen.random() < p)
        self.draws.append(("coin", float(value)))
        return value

    def randint(self, n: int) -> int:
        value = int(self._gen.integers(0, n))
        self.draws.append(("randint", float(value)))
        return value


@dataclass(frozen=True)
class ScaleSample:
    alpha: float
    beta1: float
    beta2: float


@dataclass(frozen=True)
class AugmentConfig:
    crop_h: int = 480
    crop_w: int = 853
    flip_prob: float = 0.5
    brightness_prob: float = 0.5
    contrast_prob: float = 0.5
    saturation_prob: float = 0.5
    hue_prob: float = 0.5
    brightness_range: Tuple[float, float] = (-32.0, 32.0)
    contrast_range: Tuple[float, float] = (0.5, 1.5)
    saturation_range: Tuple[float, float] = (0.5, 1.5)
    hue_range: Tuple[float, float] = (-18.0, 18.0)
    seed: int = field(default=0)

    def __post_init__(self) -> None:
        if self.crop_h < 1 or self.crop_w < 1:
            raise ValidationError(f"crop size must be positive, got ({self.crop_h}, {self.crop_w})")
        for name in ("flip_prob", "brightness_prob", "contrast_prob", "saturation_prob", "hue_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")
        for name in ("brightness_range", "contrast_range", "saturation_range", "hue_range"):
            low, high = getattr(self, name)
            if low > high:
                raise ValidationError(f"{name} is empty: ({low}, {high})")


# -----------------------------------------------------------------------------
# Geometry
# -----------------------------------------------------------------------------

def sample_scale(rng: DrawSource) -> ScaleSample:
    """Draw alpha ~ U(1, 2) (reciprocal with probability 0.5), then beta1, beta2 ~ U(-0.2, 0.2)."""
    alpha = rng.uniform(*SCALE_RANGE)
    if rng.coin(0.5):
        alpha = 1.0 / alpha
    beta1 = rng.uniform(-ASPECT_JITTER, ASPECT_JITTER)
    beta2 = rng.uniform(-ASPECT_JITTER, ASPECT_JITTER)
    return ScaleSample(alpha, beta1, beta2)


def _round_half_up(x: float) -> int:
    return max(1, int(math.floor(x + 0.5)))


def scaled_size(height: int, width: int, s: ScaleSample) -> Tuple[int, int]:
    return (_round_half_up(height * s.alpha * (1.0 + s.beta1)),
            _round_half_up(width * s.alpha * (1.0 + s.beta2)))


def resize_pair(img: Image, lbl: LabelMap, s: ScaleSample) -> Tuple[Image, LabelMap]:
    """Resize image bilinearly and label nearest-neighbour to the sampled size."""
    if (img.height, img.width) != lbl.shape:
        raise ValidationError(f"image {img.height}x{img.width} and label {lbl.height}x{lbl.width} differ in size")
    h, w = scaled_size(img.height, img.width, s)
    if (h, w) == lbl.shape:
        return img, lbl
    out_img = PILImage.fromarray(img.data).resize((w, h), PILImage.Resampling.BILINEAR)
    out_lbl = PILImage.fromarray(lbl.data).resize((w, h), PILImage.Resampling.NEAREST)
    return Image(np.asarray(out_img)), LabelMap(np.asarray(out_lbl))


def random_crop(img: Image, lbl: LabelMap, cfg: AugmentConfig, rng: DrawSource) -> Tuple[Image, LabelMap]:
    """Pad bottom/right up to the crop size if needed, then crop at a random offset.

    Both offsets are always drawn (row first) so the draw schedule does not
    depend on the image size.
    """
    pad_h = max(0, cfg.crop_h - img.height)
    pad_w = max(0, cfg.crop_w - img.width)
    image = img.data
    label = lbl.data
    if pad_h or pad_w:
        image = np.pad(image, ((0, pad_h), (0, pad_w), (0, 0)), constant_values=IMAGE_PAD_VALUE)
        label = np.pad(label, ((0, pad_h), (0, pad_w)), constant_values=IGNORE_LABEL)
    row = rng.randint(image.shape[0] - cfg.crop_h + 1)
    col = rng.randint(image.shape[1] - cfg.crop_w + 1)
    window = (slice(row, row + cfg.crop_h), slice(col, col + cfg.crop_w))
    return Image(image[window]), LabelMap(label[window])


def hflip_pair(img: Image, lbl: LabelMap) -> Tuple[Image, LabelMap]:
    return Image(img.data[:, ::-1]), LabelMap(lbl.data[:, ::-1])


# -----------------------------------------------------------------------------
# Photometric distortion
# -----------------------------------------------------------------------------

def _to_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def adjust_brightness(data: np.ndarray, delta: float) -> np.ndarray:
    return _to_u8(data.astype(np.float32) + np.float32(delta))


def adjust_contrast(data: np.ndarray, factor: float) -> np.ndarray:
    return _to_u8(data.astype(np.float32) * np.float32(factor))


def adjust_saturation(data: np.ndarray, factor: float) -> np.ndarray:
    hsv = rgb2hsv(data).astype(np.float32)
    hsv[..., 1] = np.clip(hsv[..., 1] * np.float32(factor), 0.0, 1.0)
    return _to_u8(hsv2rgb(hsv) * 255.0)


def adjust_hue(data: np.ndarray, degrees: float) -> np.ndarray:
    hsv = rgb2hsv(data).astype(np.float32)
    hsv[..., 0] = np.mod(hsv[..., 0] * 360.0 + np.float32(degrees), 360.0) / 360.0
    return _to_u8(hsv2rgb(hsv) * 255.0)


def metric_distortion(img: Image, cfg: AugmentConfig, rng: DrawSource) -> Image:
    """Brightness, contrast, saturation, hue; each applied with its own coin.

    For every op the coin is drawn first and the value only when the coin
    comes up. Results are rounded and clamped to uint8 after each op.
    """
    data = img.data
    if rng.coin(cfg.brightness_prob):
        data = adjust_brightness(data, rng.uniform(*cfg.brightness_range))
    if rng.coin(cfg.contrast_prob):
        data = adjust_contrast(data, rng.uniform(*cfg.contrast_range))
    if rng.coin(cfg.saturation_prob):
        data = adjust_saturation(data, rng.uniform(*cfg.saturation_range))
    if rng.coin(cfg.hue_prob):
        data = adjust_hue(data, rng.uniform(*cfg.hue_range))
    return img if data is img.data else Image(data)


# -----------------------------------------------------------------------------
# Full pipeline
# -----------------------------------------------------------------------------

def run_pipeline(img: Image, lbl: LabelMap, cfg: AugmentConfig, rng: DrawSource) -> Tuple[Image, LabelMap]:
    img, lbl = resize_pair(img, lbl, sample_scale(rng))
    img, lbl = random_crop(img, lbl, cfg, rng)
    if rng.coin(cfg.flip_prob):
        img, lbl = hflip_pair(img, lbl)
    return metric_distortion(img, cfg, rng), lbl


def augment(img: Image, lbl: LabelMap, cfg: AugmentConfig, image_index: int) -> Tuple[Image, LabelMap]:
    """Augment one pair; a pure function of its arguments."""
    return run_pipeline(img, lbl, cfg, AugRng(cfg.seed, image_index))


def augment_with_draws(img: Image, lbl: LabelMap, cfg: AugmentConfig,
                       image_index: int) -> Tuple[Image, LabelMap, List[Tuple[str, float]]]:
    rng = AugRng(cfg.seed, image_index)
    out_img, out_lbl = run_pipeline(img, lbl, cfg, rng)
    return out_img, out_lbl, list(rng.draws)
