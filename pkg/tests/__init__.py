# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""segfuse test suite.

Test Organization:
    - unit/: Fast, isolated tests of one module each
    - integration/: CLI runs against files written to tmp_path
    - conftest.py: Shared pytest fixtures and configuration
    - helpers.py: Synthetic probability volumes

Running Tests:
    # All tests
    pytest

    # Skip the full-size augmentation runs
    pytest -m "not slow"

    # With coverage
    pytest --cov=segfuse --cov-report=html
"""
