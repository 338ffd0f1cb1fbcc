import asyncio

from core.queue_manager import BenchCell, QueueManager


def cells(count: int) -> list[BenchCell]:
    return [BenchCell("d", "c45", "unit", seed) for seed in range(count)]


def test_cell_identity():
    cell = BenchCell("iris", "pc45", "random", 3)
    assert cell.key == ("iris", "pc45", "random", 3)
    assert cell.cell_id == BenchCell("iris", "pc45", "random", 3).cell_id
    assert cell.cell_id != BenchCell("iris", "pc45", "random", 4).cell_id
    assert str(cell) == "iris/pc45/random/seed=3"


def test_every_cell_processed_once():
    seen = []

    async def processor(cell):
        await asyncio.sleep(0)
        seen.append(cell.seed)

    async def run():
        manager = QueueManager(num_workers=3)
        manager.set_processor(processor)
        await manager.run_all(cells(10))
        return manager

    manager = asyncio.run(run())
    assert sorted(seen) == list(range(10))
    assert not manager.is_running
    assert manager.pending_jobs == 0
    assert manager.queued == manager.finished == 10


def test_failing_cell_does_not_stop_the_pool():
    seen = []

    async def processor(cell):
        if cell.seed == 2:
            raise RuntimeError("boom")
        seen.append(cell.seed)

    async def run():
        manager = QueueManager(num_workers=2)
        manager.set_processor(processor)
        await manager.run_all(cells(5))
        return manager

    manager = asyncio.run(run())
    assert sorted(seen) == [0, 1, 3, 4]
    assert manager.errors == 1 and manager.finished == 5


def test_worker_count_is_at_least_one():
    assert QueueManager(num_workers=0).num_workers == 1
