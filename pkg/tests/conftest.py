# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Shared pytest configuration and fixtures for the segfuse test suite.

Fixtures build small synthetic tensors and write them to tmp_path in the
layouts the CLI expects (SEGT files, PNG labels, manifests).
"""

import sys
from pathlib import Path
from typing import Callable, Dict

import numpy as np
import pytest
from PIL import Image as PILImage

# Add src to path for imports during testing
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from segfuse.dataset import MANIFEST_HEADER
from segfuse.tensor_io import write_array


# ============================================================================
# Pytest Configuration
# ============================================================================

def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line("markers", "integration: end-to-end CLI test")
    config.addinivalue_line("markers", "slow: mark test as slow (>1 second execution time)")


# ============================================================================
# Environment Fixtures
# ============================================================================

@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch) -> None:
    """Clear environment variables that change CLI defaults."""
    for var in ("SEGFUSE_THREADS", "SEGFUSE_LOG_FILE_PATH"):
        monkeypatch.delenv(var, raising=False)


# ============================================================================
# Array Fixtures
# ============================================================================

@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250917)


# ============================================================================
# File System Fixtures
# ============================================================================

@pytest.fixture
def write_segt(tmp_path: Path) -> Callable[[str, np.ndarray], Path]:
    """Write an array as a SEGT file relative to tmp_path."""

    def _write(rel: str, array: np.ndarray) -> Path:
        path = tmp_path / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        write_array(array, path)
        return path

    return _write


@pytest.fixture
def write_png_label(tmp_path: Path) -> Callable[[str, np.ndarray], Path]:
    """Write an H x W uint8 array as an 8-bit grayscale PNG."""

    def _write(rel: str, array: np.ndarray) -> Path:
        path = tmp_path / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        PILImage.fromarray(np.asarray(array, dtype=np.uint8)).save(path)
        return path

    return _write


@pytest.fixture
def write_manifest_file(tmp_path: Path) -> Callable[..., Path]:
    """Write a manifest from (image, label, tag) rows."""

    def _write(rel: str, rows, header: str = MANIFEST_HEADER) -> Path:
        path = tmp_path / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [header] + ["\t".join(row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write


@pytest.fixture
def labelled_dataset(tmp_path: Path, rng, write_segt, write_manifest_file) -> Dict[str, object]:
    """Five image/label pairs of size 24 x 32 with classes 0..3 and some 255 pixels."""
    rows = []
    labels = []
    for i in range(5):
        img = rng.integers(0, 256, size=(24, 32, 3), dtype=np.uint8)
        lbl = rng.integers(0, 4, size=(24, 32)).astype(np.uint8)
        lbl[:2, :] = 255
        write_segt(f"data/images/frame{i}.segt", img)
        write_segt(f"data/labels/frame{i}.segt", lbl)
        rows.append((f"images/frame{i}.segt", f"labels/frame{i}.segt", "vspw"))
        labels.append(lbl)
    manifest = write_manifest_file("data/train.manifest", rows)
    return {"manifest": manifest, "labels": labels, "root": tmp_path / "data"}
