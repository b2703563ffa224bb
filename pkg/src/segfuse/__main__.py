#!/usr/bin/env python3
# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Entry point for segfuse when run as a module (python -m segfuse)."""

from segfuse.cli import main

if __name__ == "__main__":
    main()
