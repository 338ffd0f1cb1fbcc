"""
Tree evaluation: ROC AUC, expected cost/height, size, lambda tuning and
results files.

Expected cost and height are measured on the training distribution; AUC on a
held-out split.
"""
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from config.settings import LAMBDA_MAX_EXP, LAMBDA_MIN_EXP, TUNE_MAX_DROP
from core.dataset import EvalSplit, Instance, PreparedData
from core.inducer import GreedyConfig, induce
from core.tree import TreeModel
from utils.files import atomic_write_text
from utils.logger import logger

CSV_COLUMNS = [
    "dataset", "tag", "cost_mode", "seed",
    "auc", "expected_cost", "expected_height", "tree_size", "wall_ms",
]
CELL_KEY = ["dataset", "tag", "cost_mode", "seed"]


@dataclass
class RunReport:
    """Metrics of one trained tree."""
    tag: str
    seed: int
    auc: float | None
    expected_cost: float
    expected_height: float
    tree_size: int
    wall_ms: float = 0.0
    dataset: str = ""
    cost_mode: str = "unit"

    def row(self) -> dict:
        return {c: getattr(self, c) for c in CSV_COLUMNS}


# --------------------------------------------------------------------------
# Complexity
# --------------------------------------------------------------------------

def _rows_and_weights(instance: Instance, split: EvalSplit | None) -> tuple[np.ndarray, np.ndarray]:
    if split is None:
        return instance.matrix, instance.weights.astype(float)
    return split.matrix, np.ones(split.n)


def expected_cost(tree: TreeModel, instance: Instance, split: EvalSplit | None = None) -> float:
    """
    Sum over objects of p(x) times the test costs on x's root-to-leaf path.

    Args:
        tree: Tree to evaluate
        instance: Instance supplying costs (and objects when split is None)
        split: Held-out rows to evaluate instead of the training objects

    Returns:
        Expected cost under the normalized object distribution
    """
    rows, weights = _rows_and_weights(instance, split)
    if weights.sum() == 0:
        return 0.0
    _, path_cost, unroutable = tree.assign(rows, instance.costs)
    if unroutable:
        logger.warning(f"{unroutable} rows hit an unseen outcome and followed the majority-mass child")
    return float((weights * path_cost).sum() / weights.sum())


def expected_height(tree: TreeModel, instance: Instance, split: EvalSplit | None = None) -> float:
    """Expected number of tests on an object's path."""
    rows, weights = _rows_and_weights(instance, split)
    if weights.sum() == 0:
        return 0.0
    _, depth, _ = tree.assign(rows)
    return float((weights * depth).sum() / weights.sum())


def expected_cost_by_nodes(tree: TreeModel, instance: Instance) -> float:
    """Training expected cost as sum over internal nodes of cost(test) * p(node)."""
    return float(sum(instance.costs[n.test] * n.mass for n in tree.internal()) / tree.total)


def tree_size(tree: TreeModel) -> int:
    return tree.size


# --------------------------------------------------------------------------
# ROC AUC
# --------------------------------------------------------------------------

def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float | None:
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(scores: Sequence | np.ndarray, labels: Sequence[int] | np.ndarray) -> float | None:
    """
    Mann-Whitney ROC AUC with half credit for tied scores.

    Args:
        scores: Positive-class scores (1-D, labels in {0, 1}) or per-class
            probability rows (2-D)
        labels: True class indices

    Returns:
        Binary AUC, or macro one-vs-rest AUC over classes present with both
        positives and negatives; None when undefined
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.ndim == 1:
        return _binary_auc(scores, labels == 1)
    if scores.shape[1] == 2:
        return _binary_auc(scores[:, 1], labels == 1)
    per_class = [_binary_auc(scores[:, c], labels == c) for c in range(scores.shape[1])]
    defined = [a for a in per_class if a is not None]
    return float(np.mean(defined)) if defined else None


def split_auc(tree: TreeModel, split: EvalSplit) -> float | None:
    """AUC of the tree's leaf distributions on a held-out split."""
    if split.n == 0:
        return None
    return roc_auc(tree.predict_proba(split.matrix), split.labels)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

def evaluate(
    tree: TreeModel,
    prepared: PreparedData,
    split: str = "test",
    tag: str = "",
    seed: int = 0,
    wall_ms: float = 0.0,
) -> RunReport:
    """
    Assemble a RunReport: complexity on the training distribution, AUC on
    the requested split.
    """
    instance = prepared.instance
    return RunReport(
        tag=tag or tree.meta.get("tag", ""),
        seed=seed,
        auc=split_auc(tree, prepared.split(split)),
        expected_cost=expected_cost(tree, instance),
        expected_height=expected_height(tree, instance),
        tree_size=tree_size(tree),
        wall_ms=wall_ms,
        dataset=prepared.meta.get("name", ""),
        cost_mode=prepared.meta.get("cost_mode", "unit"),
    )


@dataclass
class LambdaPoint:
    lam: float
    auc: float | None
    expected_cost: float


@dataclass
class LambdaTuning:
    chosen: float
    trace: list[LambdaPoint] = field(default_factory=list)
    tree: TreeModel | None = None


def lambda_grid() -> list[float]:
    """2**LAMBDA_MAX_EXP down to 2**LAMBDA_MIN_EXP, factor 1/2."""
    return [2.0 ** e for e in range(LAMBDA_MAX_EXP, LAMBDA_MIN_EXP - 1, -1)]


def tune_lambda(
    prepared: PreparedData,
    base: GreedyConfig,
    grid: Sequence[float] | None = None,
    max_drop: float = TUNE_MAX_DROP,
) -> LambdaTuning:
    """
    Walk lambda down the grid and keep the last value before validation AUC
    falls more than `max_drop` (relative) below the best AUC seen so far.

    Every grid point is trained so the trace shows the full trade-off curve.

    Returns:
        LambdaTuning with the chosen lambda, its tree and the
        (lambda, AUC, expected cost) trace
    """
    grid = sorted(lambda_grid() if grid is None else grid, reverse=True)
    trace = []
    trees = {}
    for lam in grid:
        tree = induce(prepared.instance, replace(base, lam=lam))
        trees[lam] = tree
        trace.append(LambdaPoint(lam, split_auc(tree, prepared.validation), expected_cost(tree, prepared.instance)))

    chosen = grid[0]
    best = None
    for point in trace:
        if point.auc is not None and best is not None and point.auc < best * (1.0 - max_drop):
            logger.info(f"lambda={point.lam:g}: validation AUC {point.auc:.4f} drops below {best:.4f}, stop")
            break
        chosen = point.lam
        if point.auc is not None:
            best = point.auc if best is None else max(best, point.auc)
    if best is None:
        logger.warning("validation AUC undefined for every lambda; keeping the smallest")
    logger.info(f"Tuned lambda={chosen:g} for {base.name}")
    return LambdaTuning(chosen=chosen, trace=trace, tree=trees[chosen])


def timed(fn, *args, **kwargs):
    """Run fn and return (result, wall milliseconds)."""
    start = time.perf_counter()
    result = fn(*args, **kwargs)
    return result, (time.perf_counter() - start) * 1000.0


# --------------------------------------------------------------------------
# Results files
# --------------------------------------------------------------------------

def reports_frame(reports: Sequence[RunReport]) -> pd.DataFrame:
    frame = pd.DataFrame([r.row() for r in reports], columns=CSV_COLUMNS)
    return frame.sort_values(CELL_KEY, kind="stable").reset_index(drop=True)


def append_reports(path: Path | str, reports: Sequence[RunReport]) -> None:
    """Append report rows to a results CSV, writing the header on creation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    reports_frame(reports).to_csv(path, mode="a", header=not path.exists(), index=False)


def read_reports(path: Path | str) -> list[RunReport]:
    path = Path(path)
    if not path.exists():
        return []
    frame = pd.read_csv(path, dtype={"dataset": str, "tag": str, "cost_mode": str})
    reports = []
    for row in frame.to_dict(orient="records"):
        auc = row["auc"]
        reports.append(RunReport(
            tag=row["tag"],
            seed=int(row["seed"]),
            auc=None if pd.isna(auc) else float(auc),
            expected_cost=float(row["expected_cost"]),
            expected_height=float(row["expected_height"]),
            tree_size=int(row["tree_size"]),
            wall_ms=float(row["wall_ms"]),
            dataset="" if pd.isna(row["dataset"]) else row["dataset"],
            cost_mode=row["cost_mode"],
        ))
    return reports


def write_reports(path: Path | str, reports: Sequence[RunReport]) -> None:
    """Rewrite a results CSV atomically in (dataset, tag, cost_mode, seed) order."""
    atomic_write_text(Path(path), reports_frame(reports).to_csv(index=False))


def summarize(reports: Sequence[RunReport]) -> dict:
    """
    Per (dataset, cost mode, tag) mean and standard error of AUC, expected
    cost, expected height and tree size.
    """
    frame = reports_frame(reports)
    groups = []
    metrics = ["auc", "expected_cost", "expected_height", "tree_size"]
    for (dataset, cost_mode, tag), group in frame.groupby(["dataset", "cost_mode", "tag"], sort=True):
        entry = {"dataset": dataset, "cost_mode": cost_mode, "tag": tag, "runs": int(len(group))}
        for metric in metrics:
            values = pd.to_numeric(group[metric], errors="coerce").dropna()
            entry[f"{metric}_mean"] = _clean(values.mean()) if len(values) else None
            entry[f"{metric}_stderr"] = _clean(values.sem()) if len(values) > 1 else None
        groups.append(entry)
    return {"complexity_measured_on": "train", "auc_measured_on": "test", "groups": groups}


def _clean(value: float) -> float | None:
    value = float(value)
    return None if math.isnan(value) else value


def write_summary(path: Path | str, reports: Sequence[RunReport]) -> None:
    atomic_write_text(Path(path), json.dumps(summarize(reports), indent=2, sort_keys=True))
