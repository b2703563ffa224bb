# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Unit tests for segfuse components.

Tests here build their inputs in memory or in tmp_path and exercise a
single module. Formula checks compare against small pixel-by-pixel loops
written independently of the vectorised code.
"""
