# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Integration tests for segfuse.

These tests drive the CLI through segfuse.cli.run with real files and
check exit codes, stdout and the files written.

Markers:
    - @pytest.mark.integration: All tests in this package
    - @pytest.mark.slow: Tests taking > 1 second
"""
