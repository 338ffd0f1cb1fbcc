"""
Decomposable impurity functions: entropy and Gini index.

Both are weighted sums over classes of a per-class score f_c that depends
only on the class proportion p_c(N) / p(N). Entropy uses base-2 logs.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from core.errors import InvalidSplitError, ZeroMassError

# Floating slack for mass comparisons and the non-negativity clamp
TOLERANCE = 1e-12


class ImpurityKind(str, Enum):
    """Impurity function family member."""
    ENTROPY = "entropy"
    GINI = "gini"


@dataclass(frozen=True)
class ClassHistogram:
    """Per-class probability mass of a node, with per-class object counts."""
    masses: tuple[float, ...]
    counts: tuple[int, ...] | None = None

    def __post_init__(self):
        if any(m < 0 for m in self.masses):
            raise ValueError("class masses must be non-negative")
        if self.counts is not None and len(self.counts) != len(self.masses):
            raise ValueError("counts and masses must cover the same classes")

    @classmethod
    def from_masses(cls, masses: Sequence[float], counts: Sequence[int] | None = None) -> "ClassHistogram":
        return cls(
            tuple(float(m) for m in masses),
            None if counts is None else tuple(int(c) for c in counts),
        )

    @property
    def total(self) -> float:
        return float(sum(self.masses))

    @property
    def is_pure(self) -> bool:
        return sum(1 for m in self.masses if m > 0) <= 1


def class_scores_of(proportions: np.ndarray, kind: ImpurityKind) -> np.ndarray:
    """Per-class score f_c for an array of class proportions (0 log 0 = 0)."""
    p = np.asarray(proportions, dtype=float)
    if kind is ImpurityKind.ENTROPY:
        with np.errstate(divide="ignore"):
            return np.where(p > 0, -np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return 1.0 - p


def impurity_of_masses(masses: np.ndarray, kind: ImpurityKind) -> np.ndarray:
    """
    Vectorized impurity over the last axis of a class-mass array.

    Rows with zero total mass get impurity 0; callers weight them by 0.

    Args:
        masses: Array of shape (..., n_classes)
        kind: Impurity kind

    Returns:
        Array of shape (...) with the impurity of each histogram
    """
    masses = np.asarray(masses, dtype=float)
    totals = masses.sum(axis=-1, keepdims=True)
    safe = np.where(totals > 0, totals, 1.0)
    p = masses / safe
    return (p * class_scores_of(p, kind)).sum(axis=-1)


def impurity(h: ClassHistogram, kind: ImpurityKind) -> float:
    """
    Impurity f(N) = sum_c (p_c / p) * f_c of a class histogram.

    Args:
        h: Class histogram of the node
        kind: Entropy or Gini

    Returns:
        Non-negative impurity, 0 iff the histogram is pure

    Raises:
        ZeroMassError: If the histogram carries no mass
    """
    if h.total <= 0:
        raise ZeroMassError("impurity of a node with zero mass is undefined")
    return float(impurity_of_masses(np.asarray(h.masses), kind))


def class_scores(h: ClassHistogram, kind: ImpurityKind) -> np.ndarray:
    """Per-class scores f_c(N) of a histogram."""
    if h.total <= 0:
        raise ZeroMassError("class scores of a node with zero mass are undefined")
    return class_scores_of(np.asarray(h.masses) / h.total, kind)


def conditional_impurity(
    children: Sequence[ClassHistogram],
    kind: ImpurityKind,
    parent: ClassHistogram | None = None,
) -> float:
    """
    Weighted impurity f(N|t) of the children of a split.

    Empty branches contribute nothing.

    Args:
        children: One histogram per branch value
        kind: Impurity kind
        parent: Parent histogram; when given, the children may not outweigh it

    Returns:
        sum_v (p(N_v) / p(N)) * f(N_v)

    Raises:
        InvalidSplitError: If the children carry more mass than the parent
        ZeroMassError: If every child is empty
    """
    child_totals = [c.total for c in children]
    total = sum(child_totals)
    if parent is not None:
        if total > parent.total * (1 + TOLERANCE) + TOLERANCE:
            raise InvalidSplitError(
                f"children mass {total:.6g} exceeds parent mass {parent.total:.6g}"
            )
        total = parent.total
    if total <= 0:
        raise ZeroMassError("conditional impurity of an empty split is undefined")
    return sum(
        (mass / total) * impurity(child, kind)
        for child, mass in zip(children, child_totals)
        if mass > 0
    )


def impurity_reduction(
    parent: ClassHistogram,
    children: Sequence[ClassHistogram],
    kind: ImpurityKind,
) -> float:
    """
    Impurity reduction f(N) - f(N|t), clamped at zero.

    Non-negative by concavity; rounding noise below zero is clamped.
    """
    diff = impurity(parent, kind) - conditional_impurity(children, kind, parent)
    return max(diff, 0.0)


def gamma_bound(kind: ImpurityKind, delta: float) -> float:
    """
    Upper bound on the per-class score f_c(x)(N) over all nodes.

    Entropy: log2(1 / delta). Gini: 1.
    """
    if kind is ImpurityKind.ENTROPY:
        return float(np.log2(1.0 / delta))
    return 1.0
