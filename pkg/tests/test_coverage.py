from itertools import combinations

import numpy as np
import pytest

from core.coverage import (
    child_state,
    coverage_state,
    f_or,
    f_pairs,
    f_prob,
    marginal_gain,
    min_increment_check,
    node_state,
    pair_count,
    path_node,
    root_pairs,
    root_state,
    stops,
)
from core.dataset import Instance
from core.errors import CapViolationError


def test_pair_count_matches_enumeration(rng):
    for _ in range(50):
        labels = rng.integers(0, 3, size=int(rng.integers(1, 9)))
        brute = sum(1 for a, b in combinations(labels, 2) if a != b)
        assert pair_count(np.bincount(labels, minlength=3)) == brute


def test_f_prob_examples(four_objects):
    node = node_state(four_objects, [0, 1])
    assert f_prob(four_objects, 0, root_state(four_objects)) == 0.0
    assert f_prob(four_objects, 0, node) == pytest.approx(2 / 3)
    with_theta = four_objects.with_theta_units(2)
    assert f_prob(with_theta, 0, node_state(with_theta, [0, 1])) == 1.0


def test_f_prob_single_object_universe():
    single = Instance.create([[0]], [0])
    assert f_prob(single, 0, root_state(single)) == 1.0


def test_f_pairs_examples(mixed_four):
    pairs_root = root_pairs(mixed_four)
    assert pairs_root == 4
    assert f_pairs(mixed_four, 0, root_state(mixed_four), pairs_root) == 0.0
    assert f_pairs(mixed_four, 0, node_state(mixed_four, [0, 2]), pairs_root) == pytest.approx(0.75)
    assert f_pairs(mixed_four, 0, node_state(mixed_four, [0, 1]), pairs_root) == 1.0


def test_f_pairs_single_class_instance():
    instance = Instance.create([[0], [1]], [0, 0])
    assert f_pairs(instance, 0, root_state(instance), root_pairs(instance)) == 1.0


def test_f_or_disjunction(mixed_four):
    pairs_root = root_pairs(mixed_four)
    mixed = node_state(mixed_four, [0, 2])
    assert f_or(mixed_four, 0, mixed, pairs_root) == pytest.approx(11 / 12)
    assert f_or(mixed_four, 0, root_state(mixed_four), pairs_root) == 0.0
    assert f_or(mixed_four, 0, node_state(mixed_four, [0, 1]), pairs_root) == 1.0


def test_marginal_gain(four_objects):
    pairs_root = root_pairs(four_objects)
    root = root_state(four_objects)
    child = child_state(four_objects, root, 0, 0)
    assert child.members.tolist() == [0, 1]
    gain = marginal_gain(four_objects, 0, root, 0, pairs_root)
    assert gain == pytest.approx(f_or(four_objects, 0, child, pairs_root))
    # test 0 is constant on {x0, x1}
    assert marginal_gain(four_objects, 0, child, 0, pairs_root) == 0.0


def test_coverage_state_saturation_matches_stopping(rng):
    for _ in range(30):
        n = int(rng.integers(2, 7))
        codes = rng.choice(16, size=n, replace=False)
        matrix = (codes[:, None] >> np.arange(4)) & 1
        instance = Instance.create(matrix, rng.integers(0, 2, size=n), weights=rng.integers(1, 4, size=n),
                                   classes=["a", "b"], theta=float(rng.choice([0.0, 0.2])))
        for size in range(2, n + 1):
            node = node_state(instance, np.arange(size))
            state = coverage_state(instance, node)
            assert (state.disjunction >= 1.0).all() == stops(instance, node)
            assert ((state.disjunction >= 0) & (state.disjunction <= 1)).all()


def test_path_node_is_order_independent(four_objects):
    assert path_node(four_objects, 3, [0, 1]).tolist() == [3]
    assert path_node(four_objects, 3, [1, 0]).tolist() == [3]
    assert path_node(four_objects, 3, []).tolist() == [0, 1, 2, 3]


def test_min_increment_uniform_four(four_objects):
    report = min_increment_check(four_objects)
    assert report.passed
    assert report.negative_gains == 0
    assert report.min_gain_or >= four_objects.delta / 6


def test_min_increment_single_class():
    instance = Instance.create([[0, 0], [0, 1], [1, 1]], [0, 0, 0])
    report = min_increment_check(instance)
    assert report.passed
    assert report.bound_or is None
    assert report.min_gain_prob is not None


def test_min_increment_caps():
    instance = Instance.create(np.eye(9, dtype=int), list(range(9)))
    with pytest.raises(CapViolationError):
        min_increment_check(instance)
