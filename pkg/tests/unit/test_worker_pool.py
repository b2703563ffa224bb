# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Unit tests for the ordered worker pool."""

import random
import threading
import time

import pytest

from segfuse.errors import ValidationError
from segfuse.worker_pool import THREADS_ENV, WorkerPool, resolve_threads


def jittered_square(x: int) -> int:
    time.sleep(random.random() * 0.005)
    return x * x


class TestResolveThreads:
    def test_flag_wins(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert resolve_threads(5) == 5

    def test_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert resolve_threads() == 3

    def test_default_is_positive(self):
        assert resolve_threads() >= 1

    @pytest.mark.parametrize("value", ["0", "-2", "many"])
    def test_bad_environment(self, monkeypatch, value):
        monkeypatch.setenv(THREADS_ENV, value)
        with pytest.raises(ValidationError):
            resolve_threads()

    def test_bad_flag(self):
        with pytest.raises(ValidationError):
            resolve_threads(0)


class TestWorkerPool:
    @pytest.mark.parametrize("workers", [1, 2, 8])
    def test_results_keep_input_order(self, workers):
        """Results come back in submission order.

        Given: Items whose work finishes in random order
        When: run() is used with different worker counts
        Then: The result list matches the serial map exactly
        """
        items = list(range(40))
        assert WorkerPool(workers).run(jittered_square, items) == [x * x for x in items]

    def test_empty_input(self):
        assert WorkerPool(2).run(jittered_square, []) == []

    def test_callback_fires_in_order(self):
        seen = []
        WorkerPool(4, on_done=lambda i, n: seen.append((i, n))).run(jittered_square, range(6))
        assert seen == [(i, 6) for i in range(1, 7)]

    def test_map_reduce_folds_in_order(self):
        result = WorkerPool(4).map_reduce(str, range(10), lambda acc, s: acc + s, "")
        assert result == "0123456789"

    def test_concurrency_is_bounded(self):
        lock = threading.Lock()
        active = peak = 0

        def track(_):
            nonlocal active, peak
            with lock:
                active += 1
                peak = max(peak, active)
            time.sleep(0.01)
            with lock:
                active -= 1

        WorkerPool(3).run(track, range(12))
        assert 1 <= peak <= 3

    def test_failure_propagates(self):
        def boom(x):
            if x == 4:
                raise ValueError("bad item")
            return x

        with pytest.raises(ValueError, match="bad item"):
            WorkerPool(2).run(boom, range(10))

    async def test_async_map(self):
        assert await WorkerPool(2).map(lambda x: x + 1, [1, 2, 3]) == [2, 3, 4]

    async def test_sync_wrappers_inside_running_loop(self):
        pool = WorkerPool(3)
        assert pool.run(lambda x: x * x, range(6)) == [0, 1, 4, 9, 16, 25]
        assert pool.map_reduce(lambda x: x, range(5), lambda acc, x: acc + [x], []) == [0, 1, 2, 3, 4]

    def test_repr(self):
        assert repr(WorkerPool(2)) == "<WorkerPool workers=2>"
