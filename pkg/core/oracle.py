"""
Brute-force ground truth for small instances: exact minimum-expected-cost
trees, exhaustive coverage-property audits, greedy/optimal ratio sweeps and
the exhaustive pruning oracle.
"""
import itertools
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from config.settings import AUDIT_MAX_OBJECTS, AUDIT_MAX_TESTS
from core.coverage import (
    COVERAGE_FUNCTIONS,
    TOLERANCE,
    CoverageFn,
    coverage_table,
    f_or,
    node_state,
    root_pairs,
    stops,
    subset_tests,
)
from core.dataset import Instance
from core.errors import CapViolationError
from core.impurity import ImpurityKind, impurity_of_masses
from core.inducer import SCORE_TIE_TOLERANCE, Algorithm, GreedyConfig, induce
from core.metrics import expected_cost_by_nodes
from core.tree import Node, TreeModel
from utils.files import atomic_write_text
from utils.logger import logger

# Lambda standing in for "large" in the ratio sweep
LARGE_LAMBDA = 1e3
SWEEP_LAMBDAS = (0.0, 1.0, LARGE_LAMBDA)
RATIO_FLOOR = 1.0 - 1e-9


@dataclass(frozen=True, eq=False)
class TinyInstance:
    """An Instance small enough for exhaustive search, with binary tests."""
    instance: Instance
    max_objects: int = AUDIT_MAX_OBJECTS
    max_tests: int = AUDIT_MAX_TESTS

    def __post_init__(self):
        if self.instance.n > self.max_objects or self.instance.m > self.max_tests:
            raise CapViolationError(
                f"instance with n={self.instance.n}, m={self.instance.m} exceeds caps "
                f"n<={self.max_objects}, m<={self.max_tests}"
            )
        if (self.instance.arity != 2).any():
            raise CapViolationError("exhaustive search supports binary tests only")


def random_tiny(
    rng: np.random.Generator,
    max_objects: int = 6,
    max_tests: int = 6,
    n_classes: int = 2,
    max_weight: int = 4,
    max_cost: int = 1,
    theta_units: int = 0,
) -> TinyInstance:
    """
    Draw a realizable tiny instance: distinct binary rows, random labels,
    multiplicities in [1, max_weight] and costs in [1, max_cost].
    """
    m = int(rng.integers(2, max_tests + 1))
    n = int(rng.integers(2, min(max_objects, 2 ** m) + 1))
    codes = rng.choice(2 ** m, size=n, replace=False)
    matrix = (codes[:, None] >> np.arange(m)[None, :]) & 1
    instance = Instance.create(
        matrix,
        rng.integers(0, n_classes, size=n),
        weights=rng.integers(1, max_weight + 1, size=n),
        costs=rng.integers(1, max_cost + 1, size=m),
        classes=[f"c{c}" for c in range(n_classes)],
        arity=np.full(m, 2),
    )
    if theta_units:
        instance = instance.with_theta_units(min(theta_units, instance.total))
    return TinyInstance(instance, max_objects=max_objects, max_tests=max_tests)


# --------------------------------------------------------------------------
# Exact optimum
# --------------------------------------------------------------------------

def _members(mask: int) -> np.ndarray:
    return np.array([i for i in range(mask.bit_length()) if mask >> i & 1], dtype=np.int64)


def _split_mask(instance: Instance, mask: int, t: int) -> tuple[int, int]:
    low = high = 0
    for i in _members(mask):
        if instance.matrix[i, t]:
            high |= 1 << int(i)
        else:
            low |= 1 << int(i)
    return low, high


def _is_leaf(instance: Instance, mask: int) -> bool:
    return stops(instance, node_state(instance, _members(mask)))


def optimal_tree(tiny: TinyInstance) -> tuple[TreeModel, float]:
    """
    Minimum expected-cost tree by memoized recursion on the object subset.

    OPT(N) = 0 when N stops, otherwise the minimum over tests splitting N of
    cost(t) * mass(N) + sum of OPT over the children. Ties go to the lowest
    test index.

    Returns:
        (one optimal TreeModel, its expected cost)
    """
    instance = tiny.instance
    mass = instance.weights

    @lru_cache(maxsize=None)
    def solve(mask: int) -> tuple[int, int | None]:
        if _is_leaf(instance, mask):
            return 0, None
        best = None
        for t in range(instance.m):
            low, high = _split_mask(instance, mask, t)
            if not low or not high:
                continue
            value = int(instance.costs[t]) * int(mass[_members(mask)].sum()) + solve(low)[0] + solve(high)[0]
            if best is None or value < best[0]:
                best = (value, t)
        return best if best is not None else (0, None)

    full = (1 << instance.n) - 1
    units, _ = solve(full)

    nodes: dict[int, Node] = {}
    queue = [(0, full, 0)]
    next_id = 1
    while queue:
        node_id, mask, depth = queue.pop(0)
        state = node_state(instance, _members(mask))
        fields = dict(
            id=node_id, depth=depth, mass=state.mass, n_objects=state.n_objects,
            class_masses=tuple(int(c) for c in state.class_masses),
        )
        _, test = solve(mask)
        if test is None:
            nodes[node_id] = Node(**fields)
            continue
        children = {}
        for value, child in enumerate(_split_mask(instance, mask, test)):
            children[value] = next_id
            queue.append((next_id, child, depth + 1))
            next_id += 1
        nodes[node_id] = Node(test=test, children=children, **fields)

    tree = TreeModel(nodes, 0, instance.classes, instance.test_names, instance.total, {"tag": "optimal"})
    return tree, units / instance.total


def optimal_cost_full_key(tiny: TinyInstance) -> float:
    """Optimum memoized on (object subset, used tests); any unused test may be applied."""
    instance = tiny.instance

    @lru_cache(maxsize=None)
    def solve(mask: int, used: int) -> int:
        if _is_leaf(instance, mask):
            return 0
        options = []
        splits = False
        for t in range(instance.m):
            if used >> t & 1:
                continue
            low, high = _split_mask(instance, mask, t)
            splits = splits or bool(low and high)
            here = int(instance.costs[t]) * int(instance.weights[_members(mask)].sum())
            options.append(here + sum(solve(c, used | 1 << t) for c in (low, high) if c))
        return min(options) if splits else 0

    return solve((1 << instance.n) - 1, 0) / instance.total


def optimal_cost_enumerate(tiny: TinyInstance) -> float:
    """Optimum by plain recursion over object lists, without memoization."""
    instance = tiny.instance

    def solve(objects: list[int]) -> int:
        if stops(instance, node_state(instance, objects)):
            return 0
        best = None
        for t in range(instance.m):
            left = [i for i in objects if instance.matrix[i, t] == 0]
            right = [i for i in objects if instance.matrix[i, t] == 1]
            if not left or not right:
                continue
            here = int(instance.costs[t]) * sum(int(instance.weights[i]) for i in objects)
            value = here + solve(left) + solve(right)
            best = value if best is None else min(best, value)
        return 0 if best is None else best

    return solve(list(range(instance.n))) / instance.total


# --------------------------------------------------------------------------
# Independent ASR greedy
# --------------------------------------------------------------------------

def reference_asr_cost(tiny: TinyInstance) -> float:
    """
    Expected cost of the adaptive-ranking greedy (balance + efficiency per
    cost), written with plain per-object loops.
    """
    instance = tiny.instance
    total = instance.total
    pairs_root = root_pairs(instance)

    def grow(objects: list[int]) -> int:
        node = node_state(instance, objects)
        if stops(instance, node):
            return 0
        before = {i: f_or(instance, i, node, pairs_root) for i in objects}
        scored = []
        for t in range(instance.m):
            groups: dict[int, list[int]] = {}
            for i in objects:
                groups.setdefault(int(instance.matrix[i, t]), []).append(i)
            if len(groups) < 2:
                continue
            largest = max(sorted(groups), key=lambda v: len(groups[v]))
            bal = (node.mass - sum(int(instance.weights[i]) for i in groups[largest])) / total
            eff = 0.0
            for members in groups.values():
                child = node_state(instance, members)
                for i in members:
                    if before[i] >= 1.0:
                        continue
                    gain = f_or(instance, i, child, pairs_root) - before[i]
                    eff += instance.weights[i] / total * gain / (1.0 - before[i])
            scored.append(((bal + eff) / float(instance.costs[t]), t, groups))
        if not scored:
            return 0
        top = max(s[0] for s in scored)
        slack = SCORE_TIE_TOLERANCE * max(1.0, abs(top))
        _, t, groups = next(s for s in scored if s[0] >= top - slack)
        here = int(instance.costs[t]) * node.mass
        return here + sum(grow(groups[v]) for v in sorted(groups))

    return grow(list(range(instance.n))) / total


# --------------------------------------------------------------------------
# Approximation-ratio sweep
# --------------------------------------------------------------------------

@dataclass
class RatioRow:
    instance_seed: int
    n: int
    m: int
    lam: float
    greedy_cost: float
    optimal_cost: float
    ratio: float
    bound: float


@dataclass
class SweepResult:
    rows: list[RatioRow] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_ratio(self) -> float:
        return max((r.ratio for r in self.rows), default=1.0)


def ratio_bound(instance: Instance, lam: float, kind: ImpurityKind = ImpurityKind.ENTROPY) -> float:
    """
    The looser of 20 * F, F = 15(1 + ln(1/eps) + log2 n + lam*gamma), and
    300(1 + log2(1/delta) + log2 n + lam*gamma).
    """
    pairs_root = root_pairs(instance)
    epsilon = instance.unit / pairs_root if pairs_root else 1.0
    log_n = math.log2(instance.n)
    lam_gamma = lam * instance.gamma(kind)
    f_term = 15.0 * (1.0 + math.log(1.0 / epsilon) + log_n + lam_gamma)
    margin = 300.0 * (1.0 + math.log2(1.0 / instance.delta) + log_n + lam_gamma)
    return max(20.0 * f_term, margin)


def approx_ratio_sweep(
    seed: int,
    count: int,
    lambdas: Iterable[float] = SWEEP_LAMBDAS,
    max_objects: int = 6,
    max_tests: int = 6,
    n_classes: int = 2,
    max_cost: int = 1,
    theta_units: int = 0,
) -> SweepResult:
    """
    Greedy/optimal expected-cost ratios over `count` seeded tiny instances.

    Instance k is drawn from default_rng(seed + k), with test costs in
    [1, max_cost] and a stopping threshold of `theta_units` multiplicity
    units. Every ratio must lie in [1 - 1e-9, bound]; at lambda 0 the greedy
    cost must also match the independent ASR reference.
    """
    result = SweepResult()
    lambdas = tuple(lambdas)
    for k in range(count):
        instance_seed = seed + k
        tiny = random_tiny(
            np.random.default_rng(instance_seed), max_objects, max_tests,
            n_classes=n_classes, max_cost=max_cost, theta_units=theta_units,
        )
        instance = tiny.instance
        _, optimum = optimal_tree(tiny)
        for lam in lambdas:
            tree = induce(instance, GreedyConfig(Algorithm.ENHANCED, lam=lam))
            greedy = expected_cost_by_nodes(tree, instance)
            if optimum > 0:
                ratio = greedy / optimum
            else:
                ratio = 1.0 if greedy == 0 else math.inf
            bound = ratio_bound(instance, lam)
            result.rows.append(RatioRow(instance_seed, instance.n, instance.m, lam, greedy, optimum, ratio, bound))
            if not RATIO_FLOOR <= ratio <= bound:
                result.failures.append(
                    f"seed {instance_seed} lambda {lam:g}: ratio {ratio:.6f} outside [{RATIO_FLOOR}, {bound:.1f}]"
                )
            if lam == 0.0:
                reference = reference_asr_cost(tiny)
                if abs(reference - greedy) > 1e-9:
                    result.failures.append(
                        f"seed {instance_seed}: greedy at lambda 0 costs {greedy:.6f}, reference ASR {reference:.6f}"
                    )
    logger.info(f"Ratio sweep: {count} instances, max ratio {result.max_ratio:.4f}, failures {len(result.failures)}")
    return result


def write_sweep_csv(path: Path | str, rows: list[RatioRow]) -> None:
    frame = pd.DataFrame([asdict(r) for r in rows], columns=list(RatioRow.__dataclass_fields__))
    atomic_write_text(Path(path), frame.to_csv(index=False))


# --------------------------------------------------------------------------
# Submodularity audit
# --------------------------------------------------------------------------

@dataclass
class AuditResult:
    passed: bool
    counterexample: dict | None = None
    checked: int = 0

    @property
    def error_message(self) -> str | None:
        if self.counterexample is None:
            return None
        c = self.counterexample
        return f"{c['function']} fails {c['property']} for object {c['object']}: {c}"


def _check_table(name: str, table: np.ndarray, m: int) -> tuple[dict | None, int]:
    checked = 0
    for t in range(m):
        bit = 1 << t
        free = np.array([s for s in range(1 << m) if not s & bit], dtype=np.int64)
        gains = table[:, free | bit] - table[:, free]           # (n, |free|)
        checked += gains.size
        bad = np.argwhere(gains < -TOLERANCE)
        if bad.size:
            i, a = (int(x) for x in bad[0])
            return {
                "function": name, "property": "monotonicity", "object": i,
                "tests": subset_tests(int(free[a]), m), "added": t, "gain": float(gains[i, a]),
            }, checked
        # every (S, S') with S a proper subset of S', both leaving t out
        small, big = np.nonzero((free[:, None] & free[None, :]) == free[:, None])
        keep = small != big
        small, big = small[keep], big[keep]
        checked += gains.shape[0] * len(small)
        bad = np.argwhere(gains[:, small] < gains[:, big] - TOLERANCE)
        if bad.size:
            i, k = (int(x) for x in bad[0])
            return {
                "function": name, "property": "diminishing returns", "object": i,
                "tests": subset_tests(int(free[small[k]]), m), "superset": subset_tests(int(free[big[k]]), m),
                "added": t, "gain": float(gains[i, small[k]]), "superset_gain": float(gains[i, big[k]]),
            }, checked
    return None, checked


def submodularity_audit(
    tiny: TinyInstance,
    functions: dict[str, CoverageFn] | None = None,
) -> AuditResult:
    """
    Exhaustively verify monotonicity and diminishing returns of every
    coverage function over all test subsets, for every object.

    Returns:
        AuditResult with the first counterexample found, if any
    """
    functions = COVERAGE_FUNCTIONS if functions is None else functions
    checked = 0
    for name, fn in functions.items():
        table = coverage_table(tiny.instance, fn)
        counterexample, count = _check_table(name, table, tiny.instance.m)
        checked += count
        if counterexample is not None:
            logger.error(f"Audit failure: {counterexample}")
            return AuditResult(False, counterexample, checked)
    return AuditResult(True, None, checked)


# --------------------------------------------------------------------------
# Pruning oracle
# --------------------------------------------------------------------------

def random_tree(rng: np.random.Generator, max_leaves: int = 12, n_classes: int = 2) -> TreeModel:
    """
    Random binary tree with consistent masses: leaf class masses are drawn,
    internal masses are the sums of their children.
    """
    target = int(rng.integers(1, max_leaves + 1))
    children: dict[int, list[int]] = {0: []}
    depth = {0: 0}
    leaves = [0]
    while len(leaves) < target:
        parent = leaves.pop(int(rng.integers(len(leaves))))
        for _ in range(2):
            child = len(depth)
            depth[child] = depth[parent] + 1
            children[child] = []
            children[parent].append(child)
            leaves.append(child)

    class_masses: dict[int, np.ndarray] = {}
    for node_id in sorted(depth, reverse=True):
        if children[node_id]:
            class_masses[node_id] = sum(class_masses[c] for c in children[node_id])
        else:
            draw = rng.integers(0, 6, size=n_classes)
            draw[int(rng.integers(n_classes))] += 1
            class_masses[node_id] = draw

    height = max(depth.values())
    nodes = {
        i: Node(
            id=i,
            depth=depth[i],
            mass=int(class_masses[i].sum()),
            n_objects=int(class_masses[i].sum()),
            class_masses=tuple(int(c) for c in class_masses[i]),
            test=depth[i] if children[i] else None,
            children={v: c for v, c in enumerate(children[i])},
        )
        for i in depth
    }
    return TreeModel(
        nodes=nodes,
        root=0,
        classes=tuple(f"c{c}" for c in range(n_classes)),
        test_names=tuple(f"t{t}" for t in range(max(height, 1))),
        total=nodes[0].mass,
    )


def _prunings(tree: TreeModel, node_id: int, kind: ImpurityKind) -> list[tuple[float, int, tuple[int, ...]]]:
    """Every pruning of a subtree as (risk, leaves, collapsed node ids)."""
    node = tree.nodes[node_id]
    here = node.mass / tree.total * float(impurity_of_masses(node.class_masses, kind)) if node.mass else 0.0
    if node.is_leaf:
        return [(here, 1, ())]
    options = [(here, 1, (node_id,))]
    parts = [_prunings(tree, c, kind) for _, c in sorted(node.children.items())]
    for combo in itertools.product(*parts):
        options.append((
            sum(p[0] for p in combo),
            sum(p[1] for p in combo),
            tuple(i for p in combo for i in p[2]),
        ))
    return options


def optimal_pruned_subtree(
    tree: TreeModel,
    alpha: float,
    kind: ImpurityKind = ImpurityKind.ENTROPY,
) -> tuple[TreeModel, float]:
    """
    Exhaustive minimizer of R + alpha * leaves over all pruned subtrees,
    ties to fewer leaves.

    Returns:
        (pruned tree, objective value)
    """
    best = None
    for risk, leaves, collapsed in _prunings(tree, tree.root, kind):
        value = risk + alpha * leaves
        if best is None or value < best[0] - 1e-12 or (abs(value - best[0]) <= 1e-12 and leaves < best[1]):
            best = (value, leaves, collapsed)
    value, _, collapsed = best
    return tree.collapse(collapsed), value
