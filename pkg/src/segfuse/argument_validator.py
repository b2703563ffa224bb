# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Argument validation for the CLI - validates numeric options and input paths."""

import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Type

from .errors import SegfuseError, ValidationError

Result = Tuple[bool, List[str]]


class ArgumentValidator:
    """Validates command-line arguments. Every check returns (is_valid, errors)."""

    @staticmethod
    def validate_gamma(gamma: float) -> Result:
        errors = []
        if not math.isfinite(gamma) or not 0.0 <= gamma <= 1.0:
            errors.append(f"--gamma must lie in [0, 1], got {gamma}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_step(step: float) -> Result:
        errors = []
        if not math.isfinite(step) or not 0.0 < step <= 0.5:
            errors.append(f"--step must lie in (0, 0.5], got {step}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_threshold(threshold: float) -> Result:
        errors = []
        if not math.isfinite(threshold) or not 0.0 <= threshold <= 1.0:
            errors.append(f"--threshold must lie in [0, 1], got {threshold}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_threads(threads: Optional[int]) -> Result:
        errors = []
        if threads is not None and threads < 1:
            errors.append(f"--threads must be at least 1, got {threads}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_num_classes(num_classes: Optional[int]) -> Result:
        errors = []
        if num_classes is not None and not 1 <= num_classes <= 255:
            errors.append(f"--num-classes must lie in [1, 255], got {num_classes}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_inputs(paths: Iterable[Path], kind: str = "file") -> Result:
        """Check that every input exists and is a file (or directory)."""
        errors = []
        for path in paths:
            if not path.exists():
                errors.append(f"Input {kind} does not exist: {path}")
            elif kind == "file" and not path.is_file():
                errors.append(f"Input path is not a file: {path}")
            elif kind == "directory" and not path.is_dir():
                errors.append(f"Input path is not a directory: {path}")
        return len(errors) == 0, errors

    @staticmethod
    def validate_outputs(paths: Sequence[Optional[Path]], inputs: Sequence[Path] = ()) -> Result:
        """Outputs must not be directories and must not overwrite an input."""
        errors = []
        resolved_inputs = {p.expanduser().resolve() for p in inputs}
        for path in paths:
            if path is None:
                continue
            if path.is_dir():
                errors.append(f"Output path is a directory: {path}")
            elif path.expanduser().resolve() in resolved_inputs:
                errors.append(f"Output path would overwrite an input: {path}")
        return len(errors) == 0, errors

    @staticmethod
    def parse_tta_input(spec: str) -> Tuple[Path, float, bool]:
        """Split ``PATH:SCALE[:flip]`` into its parts.

        Raises:
            ValidationError: If the scale is missing, not a number, or not positive
        """
        flipped = False
        body = spec
        if body.endswith(":flip"):
            flipped = True
            body = body[: -len(":flip")]
        path, sep, scale_text = body.rpartition(":")
        if not sep or not path:
            raise ValidationError(f"TTA input must look like PATH:SCALE[:flip], got {spec!r}")
        try:
            scale = float(scale_text)
        except ValueError:
            raise ValidationError(f"TTA scale {scale_text!r} is not a number in {spec!r}") from None
        if not math.isfinite(scale) or scale <= 0:
            raise ValidationError(f"TTA scale must be positive, got {scale} in {spec!r}")
        return Path(path), scale, flipped


def require(*checks: Result, error: Type[SegfuseError] = ValidationError) -> None:
    """Raise one ``error`` carrying every collected message."""
    errors = [e for _, errs in checks for e in errs]
    if errors:
        raise error("\n".join(errors))
