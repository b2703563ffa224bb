# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Worker pool for per-frame and per-record processing.

Work items are fanned out to a bounded thread executor from an asyncio loop.
Results always come back in submission order, and the completion callback
fires in submission order too, so any reduction done over the results (and
any progress output) is the same for every worker count.
"""

from __future__ import annotations

import asyncio
import os
from concurrent.futures import ThreadPoolExecutor
from typing import AsyncIterator, Callable, Coroutine, Iterable, List, Optional, Sequence, TypeVar

from .errors import ValidationError

T = TypeVar("T")
R = TypeVar("R")
A = TypeVar("A")

THREADS_ENV = "SEGFUSE_THREADS"

DoneCallback = Callable[[int, int], None]


def resolve_threads(flag: Optional[int] = None) -> int:
    """Worker count: explicit flag, then SEGFUSE_THREADS, then the core count."""
    if flag is not None:
        if flag < 1:
            raise ValidationError(f"--threads must be at least 1, got {flag}")
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError as e:
            raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from e
        if value < 1:
            raise ValidationError(f"{THREADS_ENV} must be at least 1, got {value}")
        return value
    return os.cpu_count() or 1


class WorkerPool:
    """Bounded pool running a function over a sequence of items.

    Args:
        num_workers: Thread count (default: resolve_threads())
        on_done: Optional callback ``(done_count, total)`` invoked once per
                 item, in submission order
    """

    def __init__(self, num_workers: Optional[int] = None, on_done: Optional[DoneCallback] = None) -> None:
        self.num_workers = resolve_threads(num_workers)
        self.on_done = on_done

    def __repr__(self) -> str:
        return f"<WorkerPool workers={self.num_workers}>"

    async def _ordered(self, fn: Callable[[T], R], items: Iterable[T]) -> AsyncIterator[R]:
        """Yield ``fn(item)`` in input order while up to num_workers run at once.

        The first failure in input order is re-raised after the remaining
        work has been cancelled.
        """
        work: Sequence[T] = list(items)
        if not work:
            return
        loop = asyncio.get_running_loop()
        gate = asyncio.Semaphore(self.num_workers)
        executor = ThreadPoolExecutor(max_workers=self.num_workers, thread_name_prefix="segfuse-worker")

        async def _one(item: T) -> R:
            async with gate:
                return await loop.run_in_executor(executor, fn, item)

        tasks: List[Optional[asyncio.Task]] = [asyncio.create_task(_one(item)) for item in work]
        total = len(tasks)
        try:
            for index in range(total):
                task = tasks[index]
                assert task is not None
                result = await task
                tasks[index] = None  # release the finished result
                if self.on_done is not None:
                    self.on_done(index + 1, total)
                yield result
        except BaseException:
            pending = [t for t in tasks if t is not None]
            for t in pending:
                t.cancel()
            await asyncio.gather(*pending, return_exceptions=True)
            raise
        finally:
            executor.shutdown(wait=True, cancel_futures=True)

    async def map(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply ``fn`` to every item; results in input order."""
        return await self.fold(fn, items, _append, [])

    async def fold(self, fn: Callable[[T], R], items: Iterable[T],
                   reduce: Callable[[A, R], A], initial: A) -> A:
        """Map in parallel and fold each result into the accumulator in input order."""
        acc = initial
        results = self._ordered(fn, items)
        try:
            async for result in results:
                acc = reduce(acc, result)
        finally:
            await results.aclose()
        return acc

    def run(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Synchronous wrapper around :meth:`map`.

        Safe to call from inside a running event loop: the work then gets a
        fresh loop on a helper thread.
        """
        return _run_blocking(self.map(fn, items))

    def map_reduce(self, fn: Callable[[T], R], items: Iterable[T],
                   reduce: Callable[[A, R], A], initial: A) -> A:
        """Synchronous wrapper around :meth:`fold`; see :meth:`run`."""
        return _run_blocking(self.fold(fn, items, reduce, initial))


def _run_blocking(coro: Coroutine[object, object, R]) -> R:
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coro)
    with ThreadPoolExecutor(max_workers=1, thread_name_prefix="segfuse-loop") as helper:
        return helper.submit(asyncio.run, coro).result()


def _append(acc: list, item: object) -> list:
    acc.append(item)
    return acc
