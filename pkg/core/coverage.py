"""
Per-object coverage functions driving the efficiency term of the greedy score.

For object x_i and a set S of tests, N_S^(i) is the set of objects agreeing
with x_i on every test of S. Along a root-to-node path every member of the
node N shares N_S^(i) = N, so all functions are evaluated from node-level
statistics (mass, heterogeneous pairs) plus the object's own multiplicity:

    f_prob      (1 - p(N)) / (1 - p(x_i))
    f_prob_bar  min{(1 - p(N)) / (1 - max{p(x_i), theta}), 1}
    f_pairs     (P(X) - P(N)) / P(X)
    f_or        1 - (1 - f_prob_bar)(1 - f_pairs)

Masses and pair counts are integers in multiplicity units; saturation is
decided on integers so "covered" is exact.
"""
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from core.dataset import Instance
from core.errors import CapViolationError
from config.settings import AUDIT_MAX_OBJECTS, AUDIT_MAX_TESTS

TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class NodeState:
    """Object set of a tree node with cached mass, class masses and pair count."""
    members: np.ndarray         # object indices
    mass: int                   # sum of member multiplicities
    class_masses: np.ndarray    # per-class multiplicity
    pairs: int                  # heterogeneous pairs P(N)
    path: frozenset = frozenset()

    @property
    def n_objects(self) -> int:
        return int(len(self.members))

    @property
    def is_homogeneous(self) -> bool:
        return self.pairs == 0


def pair_count(class_masses: np.ndarray) -> int:
    """P(N) = (|N|^2 - sum_c n_c^2) / 2 over multiplicity counts."""
    class_masses = np.asarray(class_masses, dtype=np.int64)
    total = int(class_masses.sum())
    return (total * total - int((class_masses * class_masses).sum())) // 2


def node_state(instance: Instance, members: np.ndarray | Iterable[int], path: Iterable[int] = ()) -> NodeState:
    """Build the NodeState of a set of objects."""
    members = np.asarray(list(members) if not isinstance(members, np.ndarray) else members, dtype=np.int64)
    class_masses = np.bincount(
        instance.labels[members], weights=instance.weights[members], minlength=instance.n_classes
    ).astype(np.int64)
    return NodeState(
        members=members,
        mass=int(instance.weights[members].sum()),
        class_masses=class_masses,
        pairs=pair_count(class_masses),
        path=frozenset(int(t) for t in path),
    )


def root_state(instance: Instance) -> NodeState:
    return node_state(instance, np.arange(instance.n))


def root_pairs(instance: Instance) -> int:
    """P(X), the heterogeneous pair count of the whole instance."""
    return pair_count(np.bincount(instance.labels, weights=instance.weights, minlength=instance.n_classes))


def stops(instance: Instance, node: NodeState, theta_units: int | None = None) -> bool:
    """Stopping predicate: homogeneous or p(N) <= theta."""
    theta_units = instance.theta_units if theta_units is None else theta_units
    return node.pairs == 0 or node.mass <= theta_units


# --------------------------------------------------------------------------
# Vectorized primitives (shared with the inducer)
# --------------------------------------------------------------------------

def prob_values(total: int, mass: np.ndarray, floor_units: np.ndarray) -> np.ndarray:
    """
    Truncated scaled excluded mass min{(T - M) / (T - D), 1}.

    Args:
        total: Denominator T
        mass: Node mass M in units (broadcastable)
        floor_units: D = max{w_i, theta_units} in units (broadcastable)

    Returns:
        Float array; exactly 1.0 where T - M >= T - D
    """
    excluded = total - np.asarray(mass, dtype=np.int64)
    room = total - np.asarray(floor_units, dtype=np.int64)
    covered = excluded >= room
    safe_room = np.where(room > 0, room, 1)
    return np.where(covered, 1.0, excluded / safe_room)


def pair_values(pairs_root: int, pairs: np.ndarray) -> np.ndarray:
    """Scaled excluded heterogeneous pairs; identically 1 when P(X) = 0."""
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs_root == 0:
        return np.ones(pairs.shape, dtype=float)
    return np.where(pairs == 0, 1.0, (pairs_root - pairs) / pairs_root)


def or_values(fp: np.ndarray, fh: np.ndarray) -> np.ndarray:
    """Disjunction 1 - (1 - fp)(1 - fh), exactly 1 when either side is 1."""
    fp = np.asarray(fp, dtype=float)
    fh = np.asarray(fh, dtype=float)
    return np.where((fp >= 1.0) | (fh >= 1.0), 1.0, 1.0 - (1.0 - fp) * (1.0 - fh))


# --------------------------------------------------------------------------
# Per-object functions
# --------------------------------------------------------------------------

CoverageFn = Callable[[Instance, int, NodeState, int], float]


def f_prob_untruncated(instance: Instance, i: int, node: NodeState, pairs_root: int = 0) -> float:
    """Plain f^P: (1 - p(N)) / (1 - p(x_i)); 1 when x_i carries all mass."""
    return float(prob_values(instance.total, node.mass, instance.weights[i]))


def f_prob(instance: Instance, i: int, node: NodeState, pairs_root: int = 0) -> float:
    """Truncated f^P with floor max{p(x_i), theta}."""
    floor_units = max(int(instance.weights[i]), instance.theta_units)
    return float(prob_values(instance.total, node.mass, floor_units))


def f_pairs(instance: Instance, i: int, node: NodeState, pairs_root: int) -> float:
    """f^H: (P(X) - P(N)) / P(X)."""
    return float(pair_values(pairs_root, node.pairs))


def f_or(instance: Instance, i: int, node: NodeState, pairs_root: int) -> float:
    """f^OR, the disjunction of the truncated f^P and f^H."""
    return float(or_values(f_prob(instance, i, node), f_pairs(instance, i, node, pairs_root)))


COVERAGE_FUNCTIONS: dict[str, CoverageFn] = {
    "f_prob": f_prob_untruncated,
    "f_prob_bar": f_prob,
    "f_pairs": f_pairs,
    "f_or": f_or,
}


def child_state(instance: Instance, node: NodeState, i: int, t: int) -> NodeState:
    """Child of `node` that x_i follows under test t."""
    outcome = instance.matrix[i, t]
    keep = node.members[instance.matrix[node.members, t] == outcome]
    return node_state(instance, keep, node.path | {t})


def marginal_gain(instance: Instance, i: int, node: NodeState, t: int, pairs_root: int) -> float:
    """f^OR_i(S + t) - f^OR_i(S), non-negative by monotonicity."""
    child = child_state(instance, node, i, t)
    return f_or(instance, i, child, pairs_root) - f_or(instance, i, node, pairs_root)


@dataclass(frozen=True, eq=False)
class CoverageState:
    """Coverage values of every member of a node."""
    members: np.ndarray
    prob: np.ndarray
    pairs: np.ndarray
    disjunction: np.ndarray
    floor_units: np.ndarray     # max{w_i, theta_units}
    pairs_root: int

    @property
    def uncovered(self) -> np.ndarray:
        return self.disjunction < 1.0


def coverage_state(instance: Instance, node: NodeState, pairs_root: int | None = None) -> CoverageState:
    """Evaluate f_prob_bar, f_pairs and f_or for every member of the node."""
    pairs_root = root_pairs(instance) if pairs_root is None else pairs_root
    floor_units = np.maximum(instance.weights[node.members], instance.theta_units)
    fp = prob_values(instance.total, node.mass, floor_units)
    fh = np.broadcast_to(pair_values(pairs_root, node.pairs), fp.shape)
    return CoverageState(
        members=node.members,
        prob=fp,
        pairs=np.array(fh),
        disjunction=or_values(fp, fh),
        floor_units=floor_units,
        pairs_root=pairs_root,
    )


# --------------------------------------------------------------------------
# Exhaustive enumeration over test subsets (small instances)
# --------------------------------------------------------------------------

def check_caps(instance: Instance, max_objects: int = AUDIT_MAX_OBJECTS, max_tests: int = AUDIT_MAX_TESTS) -> None:
    """Raise CapViolationError unless the instance is small enough to enumerate."""
    if instance.n > max_objects or instance.m > max_tests:
        raise CapViolationError(
            f"instance with n={instance.n}, m={instance.m} exceeds caps n<={max_objects}, m<={max_tests}"
        )


def path_node(instance: Instance, i: int, tests: Iterable[int]) -> np.ndarray:
    """Members of N_S^(i): objects agreeing with x_i on every test in S."""
    tests = list(tests)
    if not tests:
        return np.arange(instance.n)
    agree = (instance.matrix[:, tests] == instance.matrix[i, tests]).all(axis=1)
    return np.flatnonzero(agree)


def subset_tests(mask: int, m: int) -> list[int]:
    return [t for t in range(m) if mask >> t & 1]


def coverage_table(instance: Instance, fn: CoverageFn) -> np.ndarray:
    """
    Values fn_i(S) for every object i and every test subset S (bitmask).

    Returns:
        Array of shape (n, 2**m)
    """
    pairs_root = root_pairs(instance)
    table = np.zeros((instance.n, 1 << instance.m))
    for mask in range(1 << instance.m):
        tests = subset_tests(mask, instance.m)
        for i in range(instance.n):
            node = node_state(instance, path_node(instance, i, tests), tests)
            table[i, mask] = fn(instance, i, node, pairs_root)
    return table


@dataclass
class IncrementReport:
    """Smallest positive marginal gains observed over all (i, S, t)."""
    min_gain_or: float | None
    min_gain_prob: float | None
    bound_or: float | None
    bound_prob: float
    negative_gains: int
    checked: int

    @property
    def passed(self) -> bool:
        ok_or = self.min_gain_or is None or self.bound_or is None or \
            self.min_gain_or >= self.bound_or * (1 - 1e-9)
        ok_prob = self.min_gain_prob is None or self.min_gain_prob >= self.bound_prob * (1 - 1e-9)
        return ok_or and ok_prob and self.negative_gains == 0


def _positive_gains(table: np.ndarray, m: int) -> tuple[np.ndarray, int, int]:
    gains = []
    negative = 0
    checked = 0
    for t in range(m):
        bit = 1 << t
        without = np.array([s for s in range(1 << m) if not s & bit], dtype=np.int64)
        delta = table[:, without | bit] - table[:, without]
        checked += delta.size
        negative += int((delta < -TOLERANCE).sum())
        gains.append(delta[delta > TOLERANCE])
    return np.concatenate(gains) if gains else np.zeros(0), negative, checked


def min_increment_check(instance: Instance) -> IncrementReport:
    """
    Enumerate every (i, S, t) and report the smallest positive gains of
    f^OR and of the truncated f^P against their lower bounds.

    With integer multiplicities over total T and theta a multiple of 1/T,
    a positive f_prob_bar gain is at least 1/T and a positive f^OR gain is
    at least 1/(T * P(X)); for unit multiplicities this is delta / C(n, 2)
    or better.
    """
    check_caps(instance)
    pairs_root = root_pairs(instance)
    gains_or, negative_or, checked = _positive_gains(coverage_table(instance, f_or), instance.m)
    gains_prob, negative_prob, _ = _positive_gains(coverage_table(instance, f_prob), instance.m)
    return IncrementReport(
        min_gain_or=float(gains_or.min()) if gains_or.size else None,
        min_gain_prob=float(gains_prob.min()) if gains_prob.size else None,
        bound_or=instance.unit / pairs_root if pairs_root else None,
        bound_prob=instance.unit,
        negative_gains=negative_or + negative_prob,
        checked=checked,
    )
