# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Synthetic probability volumes shared by the tests."""

import numpy as np


def random_soft(rng: np.random.Generator, k: int, h: int, w: int) -> np.ndarray:
    """Random normalized K x H x W float32 probabilities."""
    raw = rng.random((k, h, w)) + 1e-3
    return (raw / raw.sum(axis=0, keepdims=True)).astype(np.float32)


def one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    """One-hot K x H x W float32 volume of an H x W label array."""
    out = np.zeros((k,) + labels.shape, dtype=np.float32)
    for c in range(k):
        out[c][labels == c] = 1.0
    return out
