"""
Async queue manager for benchmark cells.
"""
import asyncio
import hashlib
from dataclasses import dataclass
from typing import Awaitable, Callable, Iterable, Optional

from config.settings import BENCH_WORKERS
from utils.logger import logger


@dataclass(frozen=True)
class BenchCell:
    """One (dataset, tag, cost mode, seed) cell of the benchmark matrix."""
    dataset: str
    tag: str
    cost_mode: str
    seed: int

    @property
    def key(self) -> tuple[str, str, str, int]:
        return (self.dataset, self.tag, self.cost_mode, self.seed)

    @property
    def cell_id(self) -> str:
        text = "|".join(str(part) for part in self.key)
        return hashlib.sha1(text.encode("utf-8")).hexdigest()[:16]

    def __str__(self) -> str:
        return f"{self.dataset}/{self.tag}/{self.cost_mode}/seed={self.seed}"


class QueueManager:
    """
    Async queue manager with a bounded worker pool.
    """

    def __init__(self, num_workers: int = BENCH_WORKERS):
        self.num_workers = max(1, num_workers)
        self.queue: asyncio.Queue[BenchCell] = asyncio.Queue()
        self.workers: list[asyncio.Task] = []
        self._processor: Optional[Callable[[BenchCell], Awaitable[None]]] = None
        self._running = False
        self.queued = 0
        self.finished = 0
        self.errors = 0

    def set_processor(self, processor: Callable[[BenchCell], Awaitable[None]]) -> None:
        """
        Set the cell processor function.

        Args:
            processor: Async function run once per cell
        """
        self._processor = processor

    async def add_job(self, cell: BenchCell) -> int:
        """
        Add a cell to the queue.

        Args:
            cell: BenchCell to add

        Returns:
            Queue position (1-based)
        """
        await self.queue.put(cell)
        self.queued += 1
        position = self.queue.qsize()
        logger.debug(f"Cell queued: {cell}, position={position}")
        return position

    async def _worker(self, worker_id: int) -> None:
        logger.debug(f"Worker {worker_id} started")

        while self._running:
            try:
                try:
                    cell = await asyncio.wait_for(self.queue.get(), timeout=1.0)
                except asyncio.TimeoutError:
                    continue

                if self._processor:
                    logger.info(f"Worker {worker_id} running {cell} ({self.finished + 1}/{self.queued})")
                    try:
                        await self._processor(cell)
                    except Exception as e:
                        self.errors += 1
                        logger.error(f"Worker {worker_id} error on {cell}: {e}")
                    finally:
                        self.finished += 1
                        self.queue.task_done()
                else:
                    logger.warning("No processor set, skipping cell")
                    self.queue.task_done()

            except asyncio.CancelledError:
                break
            except Exception as e:
                logger.error(f"Worker {worker_id} unexpected error: {e}")

        logger.debug(f"Worker {worker_id} stopped")

    async def start(self) -> None:
        """Start worker pool."""
        if self._running:
            return

        self._running = True
        logger.info(f"Starting {self.num_workers} bench workers")

        for i in range(self.num_workers):
            self.workers.append(asyncio.create_task(self._worker(i + 1)))

    async def stop(self) -> None:
        """Wait for queued cells to finish, then stop the workers."""
        await self.queue.join()
        self._running = False

        for worker in self.workers:
            worker.cancel()
        if self.workers:
            await asyncio.gather(*self.workers, return_exceptions=True)

        self.workers.clear()

    async def run_all(self, cells: Iterable[BenchCell]) -> None:
        """Queue every cell, process them with the pool and shut down."""
        await self.start()
        for cell in cells:
            await self.add_job(cell)
        await self.stop()

    @property
    def pending_jobs(self) -> int:
        return self.queue.qsize()

    @property
    def is_running(self) -> bool:
        return self._running
