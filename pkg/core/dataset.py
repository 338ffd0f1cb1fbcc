"""
Dataset preprocessing: CSV -> binned, binarized, coalesced training instance.

Pipeline: read_table -> split_rows -> Binarizer (k-means binning of numeric
columns + one-hot encoding, fitted on training rows) -> coalesce ->
assign_costs -> Instance. Validation and test rows are mapped through the
fitted Binarizer and kept as plain EvalSplits.
"""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from config.settings import (
    BINS,
    FORMAT_VERSION,
    MIN_LEAF_ROWS,
    SPLIT_FRACTIONS,
    THETA,
)
from core.errors import DataQualityError, FormatVersionError
from core.impurity import ImpurityKind, gamma_bound
from utils.files import atomic_write_text
from utils.logger import logger

# Tolerance for the probability-sums-to-one invariant
PROBABILITY_TOLERANCE = 1e-12


@dataclass
class RawTable:
    """Tabular input: feature columns plus one label column."""
    frame: pd.DataFrame
    label: str
    numeric: tuple[str, ...] = ()

    def __post_init__(self):
        if self.label not in self.frame.columns:
            raise DataQualityError("label column not found", self.label)

    @property
    def names(self) -> list[str]:
        return [str(c) for c in self.frame.columns]

    @property
    def feature_names(self) -> list[str]:
        return [c for c in self.names if c != self.label]

    @property
    def n_raw(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/validation/test partition of raw rows."""
    seed: int = 0
    fractions: tuple[float, float, float] = SPLIT_FRACTIONS

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {self.fractions}")


@dataclass(frozen=True, eq=False)
class Instance:
    """
    Training input of the tree inducer.

    Probabilities are integer multiplicities over the common denominator
    `total`; theta is stored in the same units so stopping tests are exact.
    Outcomes are 0-based: test t maps object x to matrix[x, t] in [0, arity[t]).
    """
    matrix: np.ndarray          # (n, m) outcomes
    labels: np.ndarray          # (n,) class indices
    weights: np.ndarray         # (n,) multiplicities, all >= 1
    costs: np.ndarray           # (m,) integer costs, all >= 1
    theta_units: int
    classes: tuple[str, ...]
    test_names: tuple[str, ...]
    arity: np.ndarray           # (m,) outcome counts, all >= 2

    def __post_init__(self):
        self.check()

    @classmethod
    def create(
        cls,
        matrix: Sequence[Sequence[int]] | np.ndarray,
        labels: Sequence[int] | np.ndarray,
        weights: Sequence[int] | np.ndarray | None = None,
        costs: Sequence[int] | np.ndarray | None = None,
        theta: float = 0.0,
        classes: Sequence[str] | None = None,
        test_names: Sequence[str] | None = None,
        arity: Sequence[int] | np.ndarray | None = None,
    ) -> "Instance":
        """
        Build an instance from plain arrays.

        Args:
            matrix: Outcome matrix (n objects x m tests)
            labels: Class index per object
            weights: Multiplicity per object (default 1 each)
            costs: Integer cost per test (default 1 each)
            theta: Stopping mass threshold as a probability
            classes: Class names (default "0", "1", ...)
            test_names: Test names (default "t0", "t1", ...)
            arity: Outcome count per test (default: max(2, observed))

        Returns:
            Validated Instance
        """
        matrix = np.asarray(matrix, dtype=np.int16)
        if matrix.ndim != 2:
            raise DataQualityError("outcome matrix must be two-dimensional")
        n, m = matrix.shape
        labels = np.asarray(labels, dtype=np.int64)
        weights = np.ones(n, dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
        costs = np.ones(m, dtype=np.int64) if costs is None else np.asarray(costs, dtype=np.int64)
        n_classes = int(labels.max()) + 1 if labels.size else 1
        if classes is None:
            classes = [str(c) for c in range(n_classes)]
        if test_names is None:
            test_names = [f"t{t}" for t in range(m)]
        if arity is None:
            observed = matrix.max(axis=0) + 1 if n else np.zeros(m, dtype=np.int64)
            arity = np.maximum(observed, 2)
        total = int(weights.sum())
        theta_units = int(math.floor(theta * total + 1e-9))
        return cls(
            matrix=matrix,
            labels=labels,
            weights=weights,
            costs=costs,
            theta_units=theta_units,
            classes=tuple(str(c) for c in classes),
            test_names=tuple(str(t) for t in test_names),
            arity=np.asarray(arity, dtype=np.int64),
        )

    def check(self) -> None:
        """Validate every structural invariant, raising DataQualityError."""
        n, m = self.matrix.shape
        if n == 0:
            raise DataQualityError("instance has no objects")
        if self.labels.shape != (n,) or self.weights.shape != (n,):
            raise DataQualityError("labels and weights must have one entry per object")
        if self.costs.shape != (m,) or self.arity.shape != (m,) or len(self.test_names) != m:
            raise DataQualityError("costs, arity and test names must have one entry per test")
        if (self.weights < 1).any():
            raise DataQualityError("object multiplicities must be positive")
        if (self.costs < 1).any():
            raise DataQualityError("test costs must be integers >= 1")
        if (self.arity < 2).any():
            raise DataQualityError("every test needs at least two outcomes")
        if m and ((self.matrix < 0).any() or (self.matrix >= self.arity[None, :]).any()):
            raise DataQualityError("outcome outside the declared test arity")
        if self.labels.min() < 0 or self.labels.max() >= len(self.classes):
            raise DataQualityError("label index outside the class list")
        if not 0 <= self.theta_units <= self.total:
            raise DataQualityError("theta must lie in [0, 1]")
        if len(np.unique(self.matrix, axis=0)) != n:
            raise DataQualityError("realizability violated: duplicate outcome vectors")
        if abs(float(self.probabilities.sum()) - 1.0) > PROBABILITY_TOLERANCE:
            raise DataQualityError("object probabilities do not sum to 1")

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def m(self) -> int:
        return int(self.matrix.shape[1])

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def total(self) -> int:
        return int(self.weights.sum())

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.total

    @property
    def unit(self) -> float:
        """Probability of a single training row."""
        return 1.0 / self.total

    @property
    def theta(self) -> float:
        return self.theta_units / self.total

    @property
    def delta(self) -> float:
        """Minimum object probability."""
        return float(self.weights.min()) / self.total

    def gamma(self, kind: ImpurityKind) -> float:
        """Upper bound on the per-class impurity score."""
        return gamma_bound(kind, self.delta)

    def with_theta_units(self, theta_units: int) -> "Instance":
        return Instance(
            matrix=self.matrix, labels=self.labels, weights=self.weights,
            costs=self.costs, theta_units=int(theta_units),
            classes=self.classes, test_names=self.test_names, arity=self.arity,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "matrix": self.matrix.tolist(),
            "labels": self.labels.tolist(),
            "weights": self.weights.tolist(),
            "costs": self.costs.tolist(),
            "theta_units": self.theta_units,
            "total": self.total,
            "classes": list(self.classes),
            "test_names": list(self.test_names),
            "arity": self.arity.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Instance":
        m = len(data["test_names"])
        return cls(
            matrix=np.asarray(data["matrix"], dtype=np.int16).reshape(-1, m),
            labels=np.asarray(data["labels"], dtype=np.int64),
            weights=np.asarray(data["weights"], dtype=np.int64),
            costs=np.asarray(data["costs"], dtype=np.int64),
            theta_units=int(data["theta_units"]),
            classes=tuple(data["classes"]),
            test_names=tuple(data["test_names"]),
            arity=np.asarray(data["arity"], dtype=np.int64),
        )


@dataclass(frozen=True, eq=False)
class EvalSplit:
    """Held-out rows mapped through the training preprocessor (weight 1 each)."""
    matrix: np.ndarray
    labels: np.ndarray

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    def to_dict(self) -> dict[str, Any]:
        return {"matrix": self.matrix.tolist(), "labels": self.labels.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any], m: int) -> "EvalSplit":
        return cls(
            matrix=np.asarray(data["matrix"], dtype=np.int16).reshape(-1, m),
            labels=np.asarray(data["labels"], dtype=np.int64),
        )


@dataclass(eq=False)
class PreparedData:
    """A preprocessed dataset: training instance plus held-out splits."""
    instance: Instance
    validation: EvalSplit
    test: EvalSplit
    meta: dict[str, Any] = field(default_factory=dict)

    def split(self, name: str) -> EvalSplit:
        if name == "validation":
            return self.validation
        if name == "test":
            return self.test
        raise ValueError(f"unknown split '{name}'")


# --------------------------------------------------------------------------
# Raw input
# --------------------------------------------------------------------------

def read_table(
    path: Path | str,
    label: str,
    categorical: Sequence[str] | None = None,
) -> RawTable:
    """
    Read a CSV with a header row into a RawTable.

    Rows with any missing value are dropped. Numeric columns are detected
    from their dtype unless listed in `categorical`.

    Args:
        path: CSV file
        label: Label column name
        categorical: Columns to treat as categorical even if numeric

    Returns:
        RawTable with categorical columns converted to text
    """
    frame = pd.read_csv(path, skipinitialspace=True)
    frame.columns = [str(c).strip() for c in frame.columns]
    if label not in frame.columns:
        raise DataQualityError("label column not found", label)

    before = len(frame)
    frame = frame.replace("?", np.nan).dropna(axis=0, how="any").reset_index(drop=True)
    dropped = before - len(frame)
    if dropped:
        logger.info(f"Dropped {dropped} rows with missing values from {Path(path).name}")

    forced = set(categorical or ())
    numeric = []
    for column in frame.columns:
        if column == label:
            continue
        if column not in forced:
            converted = pd.to_numeric(frame[column], errors="coerce")
            if converted.notna().all():
                frame[column] = converted.astype(float)
                numeric.append(column)
                continue
        frame[column] = frame[column].astype(str).str.strip()
    frame[label] = frame[label].astype(str).str.strip()

    if frame[label].nunique() < 2:
        raise DataQualityError("label needs at least two distinct values", label)
    return RawTable(frame=frame, label=label, numeric=tuple(numeric))


# --------------------------------------------------------------------------
# Binning
# --------------------------------------------------------------------------

def _kmeans_1d(values: np.ndarray, counts: np.ndarray, k: int) -> np.ndarray:
    """
    Optimal 1-D k-means over sorted distinct values by dynamic programming.

    Returns the start index of each cluster (length k, first entry 0).
    """
    d = len(values)
    centred = values - np.average(values, weights=counts)
    w = np.concatenate([[0.0], np.cumsum(counts)])
    s1 = np.concatenate([[0.0], np.cumsum(counts * centred)])
    s2 = np.concatenate([[0.0], np.cumsum(counts * centred ** 2)])

    def sse(i: np.ndarray, j: int) -> np.ndarray:
        # within-cluster sum of squares of values[i:j]
        sw = w[j] - w[i]
        sx = s1[j] - s1[i]
        return np.maximum(s2[j] - s2[i] - sx * sx / sw, 0.0)

    # cost[q][j]: best cost of values[:j] in q+1 clusters
    cost = np.full((k, d + 1), np.inf)
    start = np.zeros((k, d + 1), dtype=np.int64)
    cost[0, 1:] = np.maximum(s2[1:] - s1[1:] ** 2 / w[1:], 0.0)
    for q in range(1, k):
        for j in range(q + 1, d + 1):
            i = np.arange(q, j)
            candidates = cost[q - 1, i] + sse(i, j)
            best = int(np.argmin(candidates))
            cost[q, j] = candidates[best]
            start[q, j] = i[best]

    starts = [0] * k
    j = d
    for q in range(k - 1, 0, -1):
        starts[q] = int(start[q, j])
        j = starts[q]
    return np.asarray(starts, dtype=np.int64)


def bin_numeric(
    values: Sequence[float] | np.ndarray,
    k: int,
    column: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Discretize a numeric column into at most k contiguous bins by 1-D k-means.

    The partition minimizes the within-bin sum of squares exactly; fewer
    than k bins come back when the column has fewer distinct values.

    Args:
        values: Column values
        k: Requested bin count (>= 1)
        column: Column name for error messages

    Returns:
        (bin index per value, bin edges of length n_bins + 1); inner edges are
        midpoints between neighbouring bins

    Raises:
        DataQualityError: On empty or non-finite input
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DataQualityError("cannot bin an empty column", column)
    if not np.isfinite(values).all():
        raise DataQualityError("non-finite values cannot be binned", column)
    if k < 1:
        raise ValueError("bin count must be at least 1")

    distinct, counts = np.unique(values, return_counts=True)
    n_bins = min(k, len(distinct))
    starts = _kmeans_1d(distinct, counts.astype(float), n_bins)

    ends = np.append(starts[1:], len(distinct))
    inner = (distinct[ends[:-1] - 1] + distinct[starts[1:]]) / 2.0
    edges = np.concatenate([[distinct[0]], inner, [distinct[-1]]])
    return apply_bins(values, edges), edges


def apply_bins(values: Sequence[float] | np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Map values to bin indices using edges from bin_numeric."""
    return np.searchsorted(edges[1:-1], np.asarray(values, dtype=float), side="right")


def _bin_labels(edges: np.ndarray) -> list[str]:
    n_bins = len(edges) - 1
    if n_bins == 1:
        return ["any"]
    labels = []
    for b in range(n_bins):
        if b == 0:
            labels.append(f"<{edges[1]:.4g}")
        elif b == n_bins - 1:
            labels.append(f">={edges[b]:.4g}")
        else:
            labels.append(f"[{edges[b]:.4g},{edges[b + 1]:.4g})")
    return labels


# --------------------------------------------------------------------------
# Binarization and coalescing
# --------------------------------------------------------------------------

def binarize(
    frame: pd.DataFrame,
    levels: dict[str, list[Any]] | None = None,
    level_names: dict[str, list[str]] | None = None,
) -> tuple[np.ndarray, list[str], dict[str, list[Any]]]:
    """
    One-hot encode categorical (or already binned) columns.

    One binary test per (column, level) pair, named "column=level". Levels
    not present in `levels` encode as all zeros across that column's tests.

    Args:
        frame: Categorical / binned columns
        levels: Known levels per column (default: sorted observed levels)
        level_names: Display names per level (default: str(level))

    Returns:
        (binary matrix, test names, levels per column)
    """
    if levels is None:
        levels = {c: sorted(frame[c].unique().tolist()) for c in frame.columns}
    blocks = []
    names = []
    for column in frame.columns:
        column_levels = levels[column]
        display = (level_names or {}).get(column) or [str(v) for v in column_levels]
        values = frame[column].to_numpy()
        block = np.stack([values == level for level in column_levels], axis=1) if column_levels else \
            np.zeros((len(frame), 0), dtype=bool)
        blocks.append(block.astype(np.int16))
        names.extend(f"{column}={name}" for name in display)
    matrix = np.concatenate(blocks, axis=1) if blocks else np.zeros((len(frame), 0), dtype=np.int16)
    return matrix, names, levels


class Binarizer(BaseEstimator, TransformerMixin):
    """
    Training-fitted preprocessor: k-means binning of numeric columns followed
    by one-hot encoding of every column.
    """

    def __init__(self, bins: int = BINS, numeric: Sequence[str] = ()):
        self.bins = bins
        self.numeric = numeric

    def fit(self, X: pd.DataFrame, y=None) -> "Binarizer":
        self.columns_ = [str(c) for c in X.columns]
        self.edges_ = {}
        binned = self._discretize(X, fit=True)
        _, self.test_names_, self.levels_ = binarize(binned, level_names=self._level_names())
        return self

    def transform(self, X: pd.DataFrame) -> np.ndarray:
        binned = self._discretize(X[self.columns_], fit=False)
        matrix, _, _ = binarize(binned, self.levels_, self._level_names())
        return matrix

    def _discretize(self, X: pd.DataFrame, fit: bool) -> pd.DataFrame:
        out = {}
        for column in X.columns:
            if column in self.numeric:
                if fit:
                    assigned, self.edges_[column] = bin_numeric(X[column].to_numpy(), self.bins, column)
                else:
                    assigned = apply_bins(X[column].to_numpy(), self.edges_[column])
                out[column] = assigned
            else:
                out[column] = X[column].astype(str).to_numpy()
        return pd.DataFrame(out, columns=list(X.columns))

    def _level_names(self) -> dict[str, list[str]]:
        return {c: _bin_labels(e) for c, e in self.edges_.items()}

    def state(self) -> dict[str, Any]:
        return {
            "bins": self.bins,
            "numeric": list(self.numeric),
            "edges": {c: e.tolist() for c, e in self.edges_.items()},
            "levels": {c: [v if isinstance(v, str) else int(v) for v in lv] for c, lv in self.levels_.items()},
        }


def coalesce(
    matrix: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray | None = None,
    n_classes: int | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Merge rows with identical outcome vectors into single objects.

    The merged object takes the majority class by multiplicity (ties go to
    the smallest class index) and the summed multiplicity. Objects keep the
    order of their first occurrence.

    Args:
        matrix: Outcome rows
        labels: Class index per row
        weights: Multiplicity per row (default 1)
        n_classes: Number of classes (default: max label + 1)

    Returns:
        (unique rows, labels, multiplicities)
    """
    matrix = np.asarray(matrix)
    labels = np.asarray(labels, dtype=np.int64)
    if matrix.shape[0] == 0:
        raise DataQualityError("cannot coalesce an empty table")
    weights = np.ones(len(labels), dtype=np.int64) if weights is None else np.asarray(weights, dtype=np.int64)
    n_classes = int(labels.max()) + 1 if n_classes is None else n_classes

    _, first, inverse = np.unique(matrix, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    group = rank[inverse]

    votes = np.zeros((len(order), n_classes), dtype=np.int64)
    np.add.at(votes, (group, labels), weights)
    merged = len(labels) - len(order)
    if merged:
        logger.info(f"Coalesced {merged} duplicate rows into {len(order)} objects")
    return matrix[first[order]], votes.argmax(axis=1), votes.sum(axis=1)


# --------------------------------------------------------------------------
# Costs, splits and the full pipeline
# --------------------------------------------------------------------------

def assign_costs(m: int, mode: str = "unit", seed: int = 0) -> np.ndarray:
    """
    Test costs: all 1 in unit mode, i.i.d. uniform on {1..10} in random mode.
    """
    if m < 1:
        raise ValueError("need at least one test")
    if mode == "unit":
        return np.ones(m, dtype=np.int64)
    if mode == "random":
        return np.random.default_rng(seed).integers(1, 11, size=m, dtype=np.int64)
    raise ValueError(f"unknown cost mode '{mode}'")


def split_rows(n_rows: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded partition of row indices into train/validation/test."""
    permutation = np.random.default_rng(spec.seed).permutation(n_rows)
    n_train = int(round(spec.fractions[0] * n_rows))
    n_val = int(round(spec.fractions[1] * n_rows))
    train = np.sort(permutation[:n_train])
    val = np.sort(permutation[n_train:n_train + n_val])
    test = np.sort(permutation[n_train + n_val:])
    return train, val, test


def prepare(
    table: RawTable,
    bins: int = BINS,
    theta: float = THETA,
    cost_mode: str = "unit",
    seed: int = 0,
    name: str = "",
) -> PreparedData:
    """
    Run the full preprocessing pipeline on a raw table.

    Args:
        table: Raw table
        bins: k-means bins per numeric column
        theta: Stopping mass threshold; raised to MIN_LEAF_ROWS training rows
            when smaller
        cost_mode: "unit" or "random"
        seed: Seed for the split and for random costs
        name: Dataset name recorded in metadata

    Returns:
        PreparedData ready for induction
    """
    classes = sorted(table.frame[table.label].unique().tolist())
    class_index = {c: i for i, c in enumerate(classes)}
    y_all = table.frame[table.label].map(class_index).to_numpy(dtype=np.int64)
    features = table.frame[table.feature_names]

    train, val, test = split_rows(table.n_raw, SplitSpec(seed=seed))
    if len(train) == 0:
        raise DataQualityError("training split is empty")

    binarizer = Binarizer(bins=bins, numeric=table.numeric)
    x_train = binarizer.fit_transform(features.iloc[train])
    x_val = binarizer.transform(features.iloc[val])
    x_test = binarizer.transform(features.iloc[test])
    m = x_train.shape[1]
    if m == 0:
        raise DataQualityError("no feature columns to build tests from")

    matrix, labels, weights = coalesce(x_train, y_all[train], n_classes=len(classes))
    if len(np.unique(labels)) < 2:
        logger.warning(f"{name or 'dataset'}: training split has a single class")

    total = int(weights.sum())
    theta_units = int(math.floor(theta * total + 1e-9))
    if theta > 0 and theta_units < MIN_LEAF_ROWS:
        logger.info(
            f"{name or 'dataset'}: theta {theta} covers {theta_units} rows, "
            f"raised to {MIN_LEAF_ROWS} rows"
        )
        theta_units = min(MIN_LEAF_ROWS, total)

    instance = Instance(
        matrix=matrix.astype(np.int16),
        labels=labels,
        weights=weights,
        costs=assign_costs(m, cost_mode, seed),
        theta_units=theta_units,
        classes=tuple(str(c) for c in classes),
        test_names=tuple(binarizer.test_names_),
        arity=np.full(m, 2, dtype=np.int64),
    )
    meta = {
        "name": name,
        "seed": seed,
        "bins": bins,
        "cost_mode": cost_mode,
        "theta": theta,
        "n_raw": table.n_raw,
        "split": {"train": train.tolist(), "validation": val.tolist(), "test": test.tolist()},
        "preprocessor": binarizer.state(),
    }
    logger.info(
        f"Prepared {name or 'dataset'}: n={table.n_raw} m={m} l={len(classes)} "
        f"objects={instance.n} theta_units={theta_units}"
    )
    return PreparedData(
        instance=instance,
        validation=EvalSplit(x_val.astype(np.int16), y_all[val]),
        test=EvalSplit(x_test.astype(np.int16), y_all[test]),
        meta=meta,
    )


def save_prepared(path: Path | str, prepared: PreparedData) -> None:
    """Write the versioned instance JSON."""
    payload = {
        "format_version": FORMAT_VERSION,
        "instance": prepared.instance.to_dict(),
        "validation": prepared.validation.to_dict(),
        "test": prepared.test.to_dict(),
        "meta": prepared.meta,
    }
    atomic_write_text(Path(path), json.dumps(payload, sort_keys=True))


def load_prepared(path: Path | str) -> PreparedData:
    """Read an instance JSON written by save_prepared."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"{path}: format_version {data.get('format_version')} != {FORMAT_VERSION}"
        )
    instance = Instance.from_dict(data["instance"])
    return PreparedData(
        instance=instance,
        validation=EvalSplit.from_dict(data["validation"], instance.m),
        test=EvalSplit.from_dict(data["test"], instance.m),
        meta=data.get("meta", {}),
    )
