# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Asynchronous atomic writes for batches of output files."""

from __future__ import annotations

import asyncio
import os
import tempfile
from pathlib import Path
from typing import Iterable, Tuple, Union

import aiofiles
import aiofiles.os

from .errors import IoFailure

PathLike = Union[str, Path]


async def atomic_write_async(path: PathLike, data: bytes, mode: int = 0o644) -> None:
    """Atomically write bytes using temp file + rename.

    Raises:
        IoFailure: If the directory is not writable or the disk is full
    """
    path = Path(path)
    try:
        await aiofiles.os.makedirs(path.parent, exist_ok=True)
        temp_fd, temp_path = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as e:
        raise IoFailure(f"cannot write file ({e.strerror})", str(path)) from e

    try:
        # aiofiles reopens the temp file by name
        os.close(temp_fd)
        async with aiofiles.open(temp_path, mode="wb") as f:
            await f.write(data)
            await f.flush()
        try:
            await aiofiles.os.chmod(temp_path, mode)
        except (OSError, AttributeError):
            pass
        await aiofiles.os.replace(temp_path, path)
    except OSError as e:
        try:
            if os.path.exists(temp_path):
                await aiofiles.os.remove(temp_path)
        except OSError:
            pass
        raise IoFailure(f"cannot write file ({e.strerror})", str(path)) from e


async def write_many_async(files: Iterable[Tuple[PathLike, bytes]], concurrency: int = 8) -> int:
    """Write several files concurrently, at most ``concurrency`` at a time.

    Returns:
        Number of files written
    """
    gate = asyncio.Semaphore(max(1, concurrency))

    async def _one(path: PathLike, data: bytes) -> None:
        async with gate:
            await atomic_write_async(path, data)

    jobs = [_one(path, data) for path, data in files]
    await asyncio.gather(*jobs)
    return len(jobs)


def write_many(files: Iterable[Tuple[PathLike, bytes]], concurrency: int = 8) -> int:
    return asyncio.run(write_many_async(files, concurrency))
