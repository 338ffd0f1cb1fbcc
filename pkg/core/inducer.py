"""
Top-down tree induction: the enhanced greedy and the classical baselines.

Every algorithm shares one stopping rule (homogeneous node or p(N) <= theta)
and one tie rule (lowest test index, smallest outcome, smallest class).
Candidate tests at a node are the tests that are not constant on it; tests
already on the path are constant there by construction.
"""
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from core.coverage import (
    CoverageState,
    NodeState,
    coverage_state,
    node_state,
    or_values,
    pair_values,
    prob_values,
    root_pairs,
    stops,
)
from core.dataset import Instance
from core.errors import InseparableNodeError, UnknownTagError
from core.impurity import ImpurityKind, impurity_of_masses
from core.tree import Node, TreeModel
from utils.logger import logger

# Relative slack under which two scores count as tied
SCORE_TIE_TOLERANCE = 1e-12


class Algorithm(str, Enum):
    ENHANCED = "enhanced"
    ASR = "asr"
    IP = "ip"
    BAL = "bal"
    C45 = "c45"
    CART = "cart"
    C_C45 = "c-c45"
    C_CART = "c-cart"


@dataclass(frozen=True)
class GreedyConfig:
    """Induction settings for one algorithm tag."""
    algorithm: Algorithm = Algorithm.ENHANCED
    lam: float = 1.0
    kind: ImpurityKind = ImpurityKind.ENTROPY
    theta: float | None = None      # overrides the instance threshold when set
    tag: str = ""

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def split_kind(self) -> ImpurityKind:
        """Impurity used by the split criterion (and by pruning)."""
        if self.algorithm in (Algorithm.C45, Algorithm.C_C45):
            return ImpurityKind.ENTROPY
        if self.algorithm in (Algorithm.CART, Algorithm.C_CART):
            return ImpurityKind.GINI
        return self.kind

    @property
    def name(self) -> str:
        return self.tag or self.algorithm.value


# tag -> (algorithm, impurity kind)
_BASE_TAGS: dict[str, tuple[Algorithm, ImpurityKind]] = {
    "asr": (Algorithm.ASR, ImpurityKind.ENTROPY),
    "ip": (Algorithm.IP, ImpurityKind.ENTROPY),
    "bal": (Algorithm.BAL, ImpurityKind.ENTROPY),
    "c45": (Algorithm.C45, ImpurityKind.ENTROPY),
    "cart": (Algorithm.CART, ImpurityKind.GINI),
    "c-c45": (Algorithm.C_C45, ImpurityKind.ENTROPY),
    "c-cart": (Algorithm.C_CART, ImpurityKind.GINI),
    "enhanced": (Algorithm.ENHANCED, ImpurityKind.ENTROPY),
    "ec45": (Algorithm.ENHANCED, ImpurityKind.ENTROPY),
    "ecart": (Algorithm.ENHANCED, ImpurityKind.GINI),
}
_PRUNABLE = {"c45", "cart", "c-c45", "c-cart", "enhanced", "ec45", "ecart"}

KNOWN_TAGS = sorted(set(_BASE_TAGS) | {f"p{t}" for t in _PRUNABLE})


def parse_tag(tag: str, lam: float = 1.0) -> tuple[GreedyConfig, bool]:
    """
    Resolve a results-table tag into a config and a post-pruning flag.

    Args:
        tag: e.g. "c45", "ecart", "pc45", "c-cart"
        lam: Trade-off weight for enhanced tags

    Returns:
        (GreedyConfig, prune)
    """
    tag = tag.strip().lower()
    prune = False
    base = tag
    if tag not in _BASE_TAGS and tag.startswith("p") and tag[1:] in _PRUNABLE:
        base, prune = tag[1:], True
    if base not in _BASE_TAGS:
        raise UnknownTagError(f"unknown algorithm tag '{tag}'; known: {', '.join(KNOWN_TAGS)}")
    algorithm, kind = _BASE_TAGS[base]
    return GreedyConfig(algorithm=algorithm, lam=lam, kind=kind, tag=tag), prune


@dataclass(frozen=True)
class ScoreBreakdown:
    """Greedy-score terms of one candidate test."""
    test: int
    bal: float
    eff: float
    disc: float
    cost: float
    total: float


@dataclass(eq=False)
class CandidateScores:
    """Score terms for every candidate test of a node (aligned arrays)."""
    tests: np.ndarray
    bal: np.ndarray
    eff: np.ndarray
    disc: np.ndarray
    cost: np.ndarray
    criterion: np.ndarray

    def breakdown(self, j: int) -> ScoreBreakdown:
        return ScoreBreakdown(
            test=int(self.tests[j]),
            bal=float(self.bal[j]),
            eff=float(self.eff[j]),
            disc=float(self.disc[j]),
            cost=float(self.cost[j]),
            total=float(self.criterion[j]),
        )

    def best(self) -> int:
        """Position of the winning candidate; near-ties go to the lowest test index."""
        top = float(self.criterion.max())
        slack = SCORE_TIE_TOLERANCE * max(1.0, abs(top))
        return int(np.flatnonzero(self.criterion >= top - slack)[0])

    @property
    def regularizer(self) -> np.ndarray:
        """(bal + eff) / cost, the adaptive-ranking part of the score."""
        return (self.bal + self.eff) / self.cost


@dataclass
class NodeTrace:
    node_id: int
    chosen: ScoreBreakdown
    best_regularizer: float


@dataclass
class InductionStats:
    """Work counters: object x candidate-test touches per tree level."""
    touches_per_level: dict[int, int] = field(default_factory=dict)
    inseparable: int = 0

    def add(self, depth: int, touches: int) -> None:
        self.touches_per_level[depth] = self.touches_per_level.get(depth, 0) + touches


def candidate_tests(instance: Instance, node: NodeState) -> np.ndarray:
    """Tests taking at least two values on the node."""
    sub = instance.matrix[node.members]
    return np.flatnonzero((sub != sub[0]).any(axis=0))


def score_candidates(
    instance: Instance,
    node: NodeState,
    coverage: CoverageState,
    config: GreedyConfig,
) -> CandidateScores:
    """
    Score every candidate test of a node under the configured criterion.

    Raises:
        InseparableNodeError: If every test is constant on the node
    """
    tests = candidate_tests(instance, node)
    if tests.size == 0:
        raise InseparableNodeError(node.n_objects)

    total = instance.total
    members = node.members
    sub = instance.matrix[np.ix_(members, tests)]
    w = instance.weights[members].astype(float)
    by_class = np.zeros((len(members), instance.n_classes))
    by_class[np.arange(len(members)), instance.labels[members]] = w
    arity = int(instance.arity[tests].max())

    # child statistics per outcome value: mass, class masses, cardinality
    masks = [(sub == v).astype(float) for v in range(arity)]
    child_mass = np.rint(np.stack([w @ mask for mask in masks])).astype(np.int64)            # (k, c)
    child_class = np.rint(np.stack([by_class.T @ mask for mask in masks])).astype(np.int64)  # (k, l, c)
    child_count = np.stack([mask.sum(axis=0) for mask in masks]).astype(np.int64)            # (k, c)
    child_pairs = (child_mass ** 2 - (child_class ** 2).sum(axis=1)) // 2                     # (k, c)

    largest = child_count.argmax(axis=0)
    bal = (node.mass - child_mass[largest, np.arange(len(tests))]) / total

    kind = config.split_kind
    parent_impurity = float(impurity_of_masses(node.class_masses, kind))
    child_impurity = impurity_of_masses(np.transpose(child_class, (0, 2, 1)), kind)           # (k, c)
    conditional = (child_mass * child_impurity).sum(axis=0) / node.mass
    reduction = np.maximum(parent_impurity - conditional, 0.0)
    disc = (node.mass / total) * reduction

    eff = np.zeros(len(tests))
    if config.algorithm in (Algorithm.ENHANCED, Algorithm.ASR):
        eff = _efficiency(instance, coverage, masks, child_mass, child_pairs)

    cost = instance.costs[tests].astype(float)
    algorithm = config.algorithm
    if algorithm is Algorithm.ENHANCED:
        criterion = (bal + eff + config.lam * disc) / cost
    elif algorithm is Algorithm.ASR:
        criterion = (bal + eff) / cost
    elif algorithm is Algorithm.IP:
        criterion = (node.pairs - child_pairs.sum(axis=0)).astype(float)
    elif algorithm is Algorithm.BAL:
        criterion = -child_count.max(axis=0).astype(float)
    elif algorithm in (Algorithm.C45, Algorithm.CART):
        criterion = reduction
    else:
        criterion = reduction / cost
    return CandidateScores(tests, bal, eff, disc, cost, criterion)


def _efficiency(
    instance: Instance,
    coverage: CoverageState,
    masks: list[np.ndarray],
    child_mass: np.ndarray,
    child_pairs: np.ndarray,
) -> np.ndarray:
    """Probability-weighted normalized f^OR gains, summed over uncovered members."""
    open_rows = coverage.uncovered
    n_tests = child_mass.shape[1]
    if not open_rows.any():
        return np.zeros(n_tests)
    p = instance.weights[coverage.members][open_rows] / instance.total
    floor_units = coverage.floor_units[open_rows][:, None]
    before = coverage.disjunction[open_rows][:, None]
    gap = 1.0 - before
    eff = np.zeros(n_tests)
    for v, mask in enumerate(masks):
        fp = prob_values(instance.total, child_mass[v][None, :], floor_units)
        fh = pair_values(coverage.pairs_root, child_pairs[v])[None, :]
        gain = or_values(fp, fh) - before
        eff += (p[:, None] * (gain / gap) * mask[open_rows]).sum(axis=0)
    return eff


def select_test(
    instance: Instance,
    node: NodeState,
    coverage: CoverageState,
    config: GreedyConfig,
) -> tuple[int, ScoreBreakdown]:
    """
    Pick the test maximizing the configured criterion at a node.

    Returns:
        (test id, score breakdown of that test)

    Raises:
        InseparableNodeError: If no test splits the node
    """
    scores = score_candidates(instance, node, coverage, config)
    j = scores.best()
    return int(scores.tests[j]), scores.breakdown(j)


def induce(
    instance: Instance,
    config: GreedyConfig,
    trace: list[NodeTrace] | None = None,
    stats: InductionStats | None = None,
) -> TreeModel:
    """
    Grow a tree top-down (breadth-first node numbering).

    Args:
        instance: Training instance
        config: Algorithm settings
        trace: If given, receives one NodeTrace per internal node
        stats: If given, receives work counters

    Returns:
        TreeModel whose leaves are homogeneous, below theta, or inseparable
    """
    if config.theta is not None:
        instance = instance.with_theta_units(int(np.floor(config.theta * instance.total + 1e-9)))
    pairs_root = root_pairs(instance)
    stats = stats if stats is not None else InductionStats()

    nodes: dict[int, Node] = {}
    queue = deque([(0, np.arange(instance.n), frozenset(), 0)])
    next_id = 1
    while queue:
        node_id, members, path, depth = queue.popleft()
        state = node_state(instance, members, path)
        fields = dict(
            id=node_id,
            depth=depth,
            mass=state.mass,
            n_objects=state.n_objects,
            class_masses=tuple(int(c) for c in state.class_masses),
        )
        if stops(instance, state):
            nodes[node_id] = Node(**fields)
            continue

        coverage = coverage_state(instance, state, pairs_root)
        try:
            scores = score_candidates(instance, state, coverage, config)
        except InseparableNodeError:
            stats.inseparable += 1
            nodes[node_id] = Node(**fields)
            continue
        stats.add(depth, state.n_objects * len(scores.tests))

        j = scores.best()
        test = int(scores.tests[j])
        if trace is not None:
            trace.append(NodeTrace(node_id, scores.breakdown(j), float(scores.regularizer.max())))

        outcomes = instance.matrix[members, test]
        children = {}
        for value in range(int(instance.arity[test])):
            child_members = members[outcomes == value]
            if child_members.size == 0:
                continue
            children[value] = next_id
            queue.append((next_id, child_members, path | {test}, depth + 1))
            next_id += 1
        nodes[node_id] = Node(test=test, children=children, **fields)

    tree = TreeModel(
        nodes=nodes,
        root=0,
        classes=instance.classes,
        test_names=instance.test_names,
        total=instance.total,
        meta={"tag": config.name, "lambda": config.lam, "kind": config.split_kind.value},
    )
    if stats.inseparable:
        logger.info(f"{config.name}: {stats.inseparable} inseparable nodes became leaves")
    logger.debug(f"Induced {config.name}: nodes={tree.size} leaves={tree.n_leaves} height={tree.height}")
    return tree
