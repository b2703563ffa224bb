# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Exception hierarchy for segfuse.

Every failure the toolkit reports derives from :class:`SegfuseError` and
carries the process exit code the CLI should use for it:

    - :class:`ValidationError` (exit 1): bad arguments, inconsistent shapes,
      class ids out of range, empty inputs.
    - :class:`IoFailure` (exit 2): files that cannot be read, written or
      parsed. Tensor format errors belong here and record the byte offset
      at which parsing failed.
"""

from __future__ import annotations

from typing import Optional

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


class SegfuseError(Exception):
    """Base class for all segfuse errors."""

    exit_code: int = EXIT_VALIDATION


class ValidationError(SegfuseError):
    """Input is well-formed on disk but semantically invalid."""

    exit_code = EXIT_VALIDATION


class IoFailure(SegfuseError):
    """A file could not be read, written or decoded."""

    exit_code = EXIT_IO

    def __init__(self, message: str, path: Optional[str] = None) -> None:
        super().__init__(f"{message}: {path}" if path else message)
        self.path = path


# -----------------------------------------------------------------------------
# Tensor file format
# -----------------------------------------------------------------------------

class TensorFormatError(IoFailure):
    """A SEGT file is malformed; ``offset`` is where parsing stopped."""

    def __init__(self, message: str, offset: int, path: Optional[str] = None) -> None:
        super().__init__(f"{message} at byte offset {offset}", path)
        self.offset = offset


class BadMagic(TensorFormatError):
    pass


class UnsupportedVersion(TensorFormatError):
    pass


class UnsupportedDtype(TensorFormatError):
    pass


class TruncatedPayload(TensorFormatError):
    pass


class TrailingData(TensorFormatError):
    pass


class UnreadableLabel(IoFailure):
    """A label file named by a manifest or directory could not be loaded."""


# -----------------------------------------------------------------------------
# Validation
# -----------------------------------------------------------------------------

class ShapeMismatch(ValidationError):
    pass


class ClassOutOfRange(ValidationError):
    pass


class ClassCountMismatch(ValidationError):
    pass


class EmptyMatrix(ValidationError):
    """No class has a non-zero union; there is nothing to evaluate."""


class AllZeroCounts(ValidationError):
    pass


class MissingWeights(ValidationError):
    pass


class MissingConfusion(ValidationError):
    pass


class AllIgnored(ValidationError):
    """Every pixel of a loss batch carries the ignore label."""


class EmptyList(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class NameMismatch(ValidationError):
    pass


class NonFiniteInput(ValidationError):
    pass


class DuplicateSource(ValidationError):
    def __init__(self, source: int, line: int) -> None:
        super().__init__(f"duplicate source id {source} at line {line}")
        self.source = source
        self.line = line


class IdOutOfRange(ValidationError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"{message} at line {line}")
        self.line = line


class ParseError(ValidationError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"{message} at line {line}")
        self.line = line


class PairingError(ValidationError):
    """Directory inputs do not pair up one-to-one by file stem."""
