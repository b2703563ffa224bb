# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Helper functions for the CLI module."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import typer

from .errors import PairingError
from .logging_setup import RunLog

# Version is read from package metadata
try:
    from importlib.metadata import version
    APP_VERSION = version("segfuse")
except Exception:
    # Fallback for development/editable installs
    APP_VERSION = "0.0.0"

FRAME_SUFFIXES = (".segt", ".png")


def version_callback(value: bool) -> None:
    """Show version and exit."""
    if value:
        typer.echo(f"segfuse version {APP_VERSION}")
        raise typer.Exit()


@dataclass
class RunState:
    """Per-invocation state shared between the app callback and the subcommands."""

    log: RunLog = field(default_factory=RunLog)
    quiet: bool = False
    command: str = ""

    def progress(self, names: Sequence[str]) -> Callable[[int, int], None]:
        """Callback printing ``[   3/10] name`` to stderr and logging frame_done."""

        def _report(done: int, total: int) -> None:
            name = names[done - 1] if done - 1 < len(names) else ""
            if not self.quiet:
                print(f"[{done:>4}/{total}] {name}", file=sys.stderr)
            self.log.event("frame_done", index=done, total=total, name=name)

        return _report


def collect_frames(root: Path) -> Dict[str, Path]:
    """Map frame keys (relative path without suffix) to files under ``root``.

    Raises:
        PairingError: If two files share a key (e.g. a.png and a.segt)
    """
    frames: Dict[str, Path] = {}
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.suffix.lower() not in FRAME_SUFFIXES:
            continue
        key = path.relative_to(root).with_suffix("").as_posix()
        if key in frames:
            raise PairingError(f"{frames[key].name} and {path.name} both provide frame {key!r} in {root}")
        frames[key] = path
    return frames


def pair_directories(*roots: Path) -> List[Tuple[str, Tuple[Path, ...]]]:
    """Pair files across directories by identical relative stem.

    Returns:
        Sorted list of (key, (path in roots[0], path in roots[1], ...))

    Raises:
        PairingError: If the directories do not hold exactly the same keys
    """
    maps = [collect_frames(root) for root in roots]
    keys = set(maps[0])
    for root, frames in zip(roots[1:], maps[1:]):
        if set(frames) != keys:
            missing = sorted(keys - set(frames))[:3]
            extra = sorted(set(frames) - keys)[:3]
            raise PairingError(
                f"{root} does not pair with {roots[0]}: missing {missing or 'none'}, unmatched {extra or 'none'}")
    if not keys:
        raise PairingError(f"no .segt or .png frames found under {roots[0]}")
    return [(key, tuple(frames[key] for frames in maps)) for key in sorted(keys)]


def frame_group(key: str) -> str:
    """Group of a frame key: its parent directory (the video), '.' at top level."""
    parent = Path(key).parent.as_posix()
    return parent if parent else "."
