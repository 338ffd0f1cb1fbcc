"""
Training and benchmark processing: one tag on one prepared dataset, and the
per-cell bench workflow (prepare -> train -> evaluate -> write cell file).
"""
import asyncio
import json
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from config.settings import BENCH_WORKERS, BINS, RESULTS_PATH, SEED, THETA
from core.dataset import PreparedData, RawTable, prepare, read_table
from core.inducer import Algorithm, GreedyConfig, induce, parse_tag
from core.metrics import (
    LambdaTuning,
    RunReport,
    evaluate,
    read_reports,
    timed,
    tune_lambda,
    write_reports,
    write_summary,
)
from core.pruner import PruneConfig, PruneResult, prune
from core.queue_manager import BenchCell, QueueManager
from core.tree import TreeModel
from utils.files import atomic_write_text, atomic_write_text_async, cleanup_temp_files, delete_file, ensure_dir
from utils.logger import logger


@dataclass
class TrainOutcome:
    """A trained tree with the settings that produced it."""
    tree: TreeModel
    config: GreedyConfig
    tuning: LambdaTuning | None = None
    pruning: PruneResult | None = None


def train_model(
    prepared: PreparedData,
    tag: str,
    lam: float = 1.0,
    tune: bool = False,
    prune_tree: bool = False,
) -> TrainOutcome:
    """
    Induce one tag, optionally tuning lambda and post-pruning on validation.

    Args:
        prepared: Preprocessed dataset
        tag: Algorithm tag; a "p" prefix forces pruning
        lam: Trade-off weight for enhanced tags (ignored when tuning)
        tune: Pick lambda by validation AUC (enhanced tags only)
        prune_tree: Post-prune even without the "p" prefix

    Returns:
        TrainOutcome
    """
    config, tagged_prune = parse_tag(tag, lam)
    tuning = None
    if tune and config.algorithm is Algorithm.ENHANCED:
        tuning = tune_lambda(prepared, config)
        config = replace(config, lam=tuning.chosen)
        tree = tuning.tree
    else:
        tree = induce(prepared.instance, config)

    pruning = None
    if tagged_prune or prune_tree:
        pruning = prune(tree, prepared.validation, PruneConfig(kind=config.split_kind))
        tree = pruning.tree
    tree.meta.update(tag=config.name, lam=config.lam)
    return TrainOutcome(tree, config, tuning, pruning)


# --------------------------------------------------------------------------
# Bench plan
# --------------------------------------------------------------------------

@dataclass
class DatasetSpec:
    name: str
    path: str
    label: str
    categorical: list[str] = field(default_factory=list)


@dataclass
class BenchPlan:
    """The benchmark matrix and its shared settings."""
    datasets: list[DatasetSpec]
    tags: list[str]
    cost_modes: list[str] = field(default_factory=lambda: ["unit"])
    seeds: list[int] = field(default_factory=lambda: list(range(SEED, SEED + 5)))
    theta: float = THETA
    bins: int = BINS
    lambda_policy: str = "tuned"           # "fixed" or "tuned"
    lam: float = 1.0
    out_dir: str = str(RESULTS_PATH)

    def __post_init__(self):
        if self.lambda_policy not in ("fixed", "tuned"):
            raise ValueError(f"lambda_policy must be 'fixed' or 'tuned', got '{self.lambda_policy}'")
        for tag in self.tags:
            parse_tag(tag)
        for mode in self.cost_modes:
            if mode not in ("unit", "random"):
                raise ValueError(f"unknown cost mode '{mode}'")

    def cells(self) -> list[BenchCell]:
        return [
            BenchCell(d.name, tag, mode, seed)
            for d in self.datasets
            for tag in self.tags
            for mode in self.cost_modes
            for seed in self.seeds
        ]

    def dataset(self, name: str) -> DatasetSpec:
        return next(d for d in self.datasets if d.name == name)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BenchPlan":
        data = dict(data)
        data["datasets"] = [DatasetSpec(**d) for d in data["datasets"]]
        return cls(**data)

    @classmethod
    def load(cls, path: Path | str) -> "BenchPlan":
        path = Path(path)
        plan = cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        # relative dataset paths are resolved against the plan file
        for spec in plan.datasets:
            if not Path(spec.path).is_absolute():
                spec.path = str(path.parent / spec.path)
        return plan


# --------------------------------------------------------------------------
# Cell processing
# --------------------------------------------------------------------------

@dataclass
class CellResult:
    cell: BenchCell
    success: bool
    report: RunReport | None = None
    error_message: str | None = None


class CellProcessor:
    """
    Runs bench cells: prepare (cached per dataset/mode/seed), train, evaluate,
    then write the cell's JSON file atomically.
    """

    def __init__(self, plan: BenchPlan, cells_dir: Path):
        self.plan = plan
        self.cells_dir = cells_dir
        self.results: list[CellResult] = []
        self._tables: dict[str, RawTable] = {}
        self._prepared: dict[tuple[str, str, int], PreparedData] = {}
        self._lock = threading.Lock()

    def cell_path(self, cell: BenchCell) -> Path:
        return self.cells_dir / f"{cell.cell_id}.json"

    def _prepared_for(self, cell: BenchCell) -> PreparedData:
        key = (cell.dataset, cell.cost_mode, cell.seed)
        with self._lock:
            if key in self._prepared:
                return self._prepared[key]
            spec = self.plan.dataset(cell.dataset)
            if spec.name not in self._tables:
                self._tables[spec.name] = read_table(spec.path, spec.label, spec.categorical)
            prepared = prepare(
                self._tables[spec.name],
                bins=self.plan.bins,
                theta=self.plan.theta,
                cost_mode=cell.cost_mode,
                seed=cell.seed,
                name=spec.name,
            )
            self._prepared[key] = prepared
            return prepared

    def run_cell(self, cell: BenchCell) -> RunReport:
        prepared = self._prepared_for(cell)
        outcome, wall_ms = timed(
            train_model,
            prepared,
            cell.tag,
            lam=self.plan.lam,
            tune=self.plan.lambda_policy == "tuned",
        )
        return evaluate(outcome.tree, prepared, "test", tag=cell.tag, seed=cell.seed, wall_ms=wall_ms)

    async def process(self, cell: BenchCell) -> None:
        """
        Process a single bench cell.

        Args:
            cell: BenchCell to run
        """
        try:
            loop = asyncio.get_running_loop()
            report = await loop.run_in_executor(None, self.run_cell, cell)
            payload = {"cell": asdict(cell), "report": report.row()}
            await atomic_write_text_async(self.cell_path(cell), json.dumps(payload, sort_keys=True))
            self.results.append(CellResult(cell, True, report))
            logger.info(f"Cell done: {cell} auc={report.auc} cost={report.expected_cost:.3f}")
        except Exception as e:
            logger.error(f"Cell failed: {cell}: {e}")
            self.results.append(CellResult(cell, False, error_message=str(e)))


def _report_from_cell_file(path: Path) -> RunReport:
    row = json.loads(path.read_text(encoding="utf-8"))["report"]
    return RunReport(**row)


@dataclass
class BenchOutcome:
    reports: list[RunReport]
    ran: int
    skipped: int
    failures: list[CellResult]

    @property
    def success(self) -> bool:
        return not self.failures


async def run_bench(plan: BenchPlan, workers: int = BENCH_WORKERS) -> BenchOutcome:
    """
    Execute every plan cell not already present in results.csv, then merge
    the new cell files into results.csv and summary.json.

    Cell files are deleted once merged, so deleting a results row schedules
    that cell again on the next run.
    """
    out_dir = ensure_dir(plan.out_dir)
    cells_dir = ensure_dir(out_dir / "cells")
    cleanup_temp_files(cells_dir)
    results_path = out_dir / "results.csv"
    atomic_write_text(out_dir / "plan.json", json.dumps(plan.to_dict(), indent=2, sort_keys=True))

    wanted = {c.key for c in plan.cells()}
    # rows from earlier plans stay in results.csv untouched
    kept = read_reports(results_path)
    done = {(r.dataset, r.tag, r.cost_mode, r.seed) for r in kept} & wanted

    processor = CellProcessor(plan, cells_dir)
    # cell files left by an interrupted run count as done
    for cell in plan.cells():
        path = processor.cell_path(cell)
        if cell.key not in done and path.exists():
            kept.append(_report_from_cell_file(path))
            done.add(cell.key)

    todo = [c for c in plan.cells() if c.key not in done]
    logger.info(f"Bench: {len(wanted)} cells, {len(done)} already done, {len(todo)} to run")

    manager = QueueManager(workers)
    manager.set_processor(processor.process)
    await manager.run_all(todo)

    reports = kept + [r.report for r in processor.results if r.success]
    write_reports(results_path, reports)
    write_summary(out_dir / "summary.json", reports)
    for cell in plan.cells():
        delete_file(processor.cell_path(cell))

    failures = [r for r in processor.results if not r.success]
    if failures:
        logger.error(f"Bench: {len(failures)} cells failed")
    return BenchOutcome(reports=reports, ran=len(todo), skipped=len(done), failures=failures)
