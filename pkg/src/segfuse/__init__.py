# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""segfuse - Segmentation fusion and evaluation toolkit.

Tools for video semantic segmentation experiments: evaluating soft or hard
predictions, computing class-imbalance weights and losses, seeded data
augmentation, test-time-augmentation fusion, two-model aggregation with a
searched mixing weight, checkpoint averaging and dataset label harmonisation.

Modules:
    cli: Command-line interface and main entry point
    tensors: Image, LabelMap and SoftPrediction value types
    tensor_io: SEGT binary tensor files and label/image loaders
    metrics: Confusion matrices, mIoU, pixel accuracy, coverage
    class_weights: Pixel counts and square-root class weights
    losses: Weighted, pixel-distribution and confusion-focal losses
    augment: Seeded joint image/label augmentation
    fusion: TTA fusion, aggregation and gamma search
    checkpoints: Parameter sets and their element-wise average
    dataset: Label remapping, manifests and coverage filtering
    worker_pool: Ordered parallel map/reduce
    logging_jsonl: JSON Lines run logger
"""

__all__ = [
    "cli", "tensors", "tensor_io", "metrics", "class_weights", "losses",
    "augment", "fusion", "checkpoints", "dataset", "worker_pool", "logging_jsonl",
]
# Version is read from package metadata
try:
    from importlib.metadata import version
    __version__ = version("segfuse")
except Exception:
    # Fallback for development/editable installs
    __version__ = "0.0.0"
