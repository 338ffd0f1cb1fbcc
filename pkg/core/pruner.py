"""
Minimal cost-complexity (weakest-link) pruning with the strength chosen on a
validation split.
"""
from dataclasses import dataclass, field

import numpy as np

from config.settings import PRUNE_ALPHA_COUNT, PRUNE_ALPHA_MAX, PRUNE_ALPHA_MIN
from core.dataset import EvalSplit
from core.impurity import ImpurityKind, impurity_of_masses
from core.metrics import split_auc
from core.tree import TreeModel
from utils.logger import logger

# Absolute slack under which two link strengths count as equal
LINK_TOLERANCE = 1e-12


def alpha_grid(
    low: float = PRUNE_ALPHA_MIN,
    high: float = PRUNE_ALPHA_MAX,
    count: int = PRUNE_ALPHA_COUNT,
) -> tuple[float, ...]:
    return tuple(float(a) for a in np.logspace(np.log10(low), np.log10(high), count))


@dataclass(frozen=True)
class PruneConfig:
    """Alpha grid (ascending) and the impurity used for the risk term."""
    alphas: tuple[float, ...] = field(default_factory=alpha_grid)
    kind: ImpurityKind = ImpurityKind.ENTROPY

    def __post_init__(self):
        if any(a < 0 for a in self.alphas):
            raise ValueError("alpha values must be non-negative")
        if list(self.alphas) != sorted(self.alphas):
            raise ValueError("alpha grid must be sorted ascending")


@dataclass
class PruneStep:
    alpha: float            # critical value at which this member becomes optimal
    tree: TreeModel


@dataclass
class PruneResult:
    tree: TreeModel
    alpha: float
    auc: float | None
    family_size: int


def node_risk(tree: TreeModel, node_id: int, kind: ImpurityKind) -> float:
    """R(node) = p(node) * impurity(node) from the stored class masses."""
    node = tree.nodes[node_id]
    if node.mass == 0:
        return 0.0
    return node.mass / tree.total * float(impurity_of_masses(node.class_masses, kind))


def subtree_risk(tree: TreeModel, node_id: int, kind: ImpurityKind) -> float:
    return sum(node_risk(tree, leaf.id, kind) for leaf in tree.subtree_leaves(node_id))


def link_strengths(tree: TreeModel, kind: ImpurityKind) -> dict[int, float]:
    """g(node) = (R(node) - R(subtree)) / (leaves(subtree) - 1) for every internal node."""
    strengths = {}
    for node in tree.internal():
        n_leaves = len(tree.subtree_leaves(node.id))
        gain = node_risk(tree, node.id, kind) - subtree_risk(tree, node.id, kind)
        strengths[node.id] = max(gain, 0.0) / (n_leaves - 1)
    return strengths


def weakest_link_sequence(tree: TreeModel, kind: ImpurityKind = ImpurityKind.ENTROPY) -> list[PruneStep]:
    """
    Nested family of pruned trees with their critical alpha values.

    The first member is the input tree at alpha 0; each following member
    collapses every internal node whose link strength ties the weakest one.
    A leaf-only tree gives a family of one.
    """
    family = [PruneStep(0.0, tree)]
    current = tree
    alpha = 0.0
    while current.internal():
        strengths = link_strengths(current, kind)
        weakest = min(strengths.values())
        doomed = [i for i, g in strengths.items() if g <= weakest + LINK_TOLERANCE]
        alpha = max(alpha, weakest)
        current = current.collapse(sorted(doomed))
        family.append(PruneStep(alpha, current))
    logger.debug(f"Weakest-link family: {len(family)} members, sizes {[s.tree.size for s in family]}")
    return family


def member_at(family: list[PruneStep], alpha: float) -> int:
    """Index of the family member optimal at alpha: the last one with critical value <= alpha."""
    index = 0
    for k, step in enumerate(family):
        if step.alpha <= alpha + LINK_TOLERANCE:
            index = k
    return index


def select_alpha(
    family: list[PruneStep],
    validation: EvalSplit,
    config: PruneConfig | None = None,
) -> PruneResult:
    """
    Evaluate the member optimal at each grid alpha on the validation split and
    keep the best AUC, ties to the smaller tree. When AUC is undefined for
    every member the unpruned tree is kept.
    """
    if not family:
        raise ValueError("empty pruning family")
    config = config or PruneConfig()
    aucs: dict[int, float | None] = {}
    best = None
    for alpha in config.alphas:
        k = member_at(family, alpha)
        if k not in aucs:
            aucs[k] = split_auc(family[k].tree, validation)
        auc = aucs[k]
        if auc is None:
            continue
        if best is None or auc > best[0] or (auc == best[0] and family[k].tree.size < family[best[2]].tree.size):
            best = (auc, alpha, k)

    if best is None:
        return PruneResult(family[0].tree, 0.0, None, len(family))
    auc, alpha, k = best
    return PruneResult(family[k].tree, alpha, auc, len(family))


def prune(
    tree: TreeModel,
    validation: EvalSplit,
    config: PruneConfig | None = None,
) -> PruneResult:
    """
    Build the weakest-link family and select the member by validation AUC.

    Args:
        tree: Tree trained on the training split
        validation: Held-out rows for selection
        config: Alpha grid and risk impurity

    Returns:
        PruneResult with the selected tree and its grid alpha
    """
    config = config or PruneConfig()
    family = weakest_link_sequence(tree, config.kind)
    result = select_alpha(family, validation, config)
    result.tree.meta.update(tree.meta, alpha=result.alpha)
    logger.info(
        f"Pruned {tree.meta.get('tag', 'tree')}: size {tree.size} -> {result.tree.size} "
        f"(alpha={result.alpha:g}, validation AUC={result.auc})"
    )
    return result
