# Copyright 2026 Chan Alston

# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at

#     http://www.apache.org/licenses/LICENSE-2.0

# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import sys
from dataclasses import dataclass
from typing import Any, Callable, Generic, List, Optional, Sequence, TypeVar

from PySide6.QtCore import QMutex, QRunnable, QThreadPool
from tqdm import tqdm

from logger_config import logger

T = TypeVar("T")


@dataclass
class BatchResult(Generic[T]):
    index: int
    value: Optional[T] = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class _Collector:
    """Stores results by input index and advances the progress bar."""

    def __init__(self, size: int, progress: tqdm):
        self.results: List[Optional[BatchResult]] = [None] * size
        self._progress = progress
        self._mutex = QMutex()

    def put(self, result: BatchResult) -> None:
        self._mutex.lock()
        try:
            self.results[result.index] = result
            self._progress.update(1)
        finally:
            self._mutex.unlock()


class RecordTask(QRunnable):
    """Runs fn(index, item) for one record; exceptions become the record's error."""

    def __init__(self, index: int, item: Any, fn: Callable[[int, Any], Any], collector: _Collector):
        super().__init__()
        # The pool must not delete tasks we still hold references to
        self.setAutoDelete(False)
        self.index = index
        self.item = item
        self.fn = fn
        self.collector = collector

    def run(self) -> None:
        try:
            result = BatchResult(index=self.index, value=self.fn(self.index, self.item))
        except Exception as e:
            logger.warning(f"Record {self.index} failed: {e}", exc_info=True)
            result = BatchResult(index=self.index, error=e)
        self.collector.put(result)


def run_ordered(
    items: Sequence[Any],
    fn: Callable[[int, Any], T],
    workers: int = 1,
    description: str = "records",
    show_progress: bool = True,
) -> List[BatchResult[T]]:
    """
    Applies fn to every item on a thread pool and returns results in input order.

    With one worker everything runs on the calling thread.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")

    progress = tqdm(
        total=len(items),
        desc=description,
        file=sys.stderr,
        disable=not show_progress or not items,
        leave=False,
    )
    collector = _Collector(len(items), progress)
    tasks = [RecordTask(i, item, fn, collector) for i, item in enumerate(items)]

    try:
        if workers == 1:
            for task in tasks:
                task.run()
        else:
            pool = QThreadPool()
            pool.setMaxThreadCount(workers)
            for task in tasks:
                pool.start(task)
            pool.waitForDone()
    finally:
        progress.close()

    logger.debug(f"Processed {len(items)} {description} with {workers} worker(s)")
    return collector.results  # type: ignore[return-value]
