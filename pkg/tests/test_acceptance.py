"""
Dataset-level gates. Slow; run with --run-acceptance.
"""
import time
from collections import deque

import numpy as np
import pytest

from conftest import DATA_DIR
from core.coverage import COVERAGE_FUNCTIONS, coverage_state, node_state
from core.dataset import prepare, read_table
from core.inducer import induce, parse_tag, score_candidates
from core.metrics import evaluate
from core.oracle import approx_ratio_sweep, random_tiny, submodularity_audit
from core.processor import train_model

pytestmark = pytest.mark.acceptance

SEEDS = range(5)
LAMBDA_SATURATED = (
    "iris validation AUC is 1.0 at every lambda, so tuning walks to the smallest lambda, "
    "whose near-asr tree costs more than c45"
)


def mean_reports(prepared_by_seed, tag, tune=False):
    reports = []
    for seed, prepared in prepared_by_seed.items():
        outcome = train_model(prepared, tag, tune=tune)
        reports.append(evaluate(outcome.tree, prepared, "test", tag=tag, seed=seed))
    auc = np.mean([r.auc for r in reports])
    return auc, np.mean([r.expected_cost for r in reports]), np.mean([r.expected_height for r in reports])


def node_members(tree, instance):
    """Training members of every node, in id order."""
    members = {tree.root: np.arange(instance.n)}
    queue = deque([tree.root])
    while queue:
        node = tree.nodes[queue.popleft()]
        for value, child in node.children.items():
            rows = members[node.id]
            members[child] = rows[instance.matrix[rows, node.test] == value]
            queue.append(child)
    return members


@pytest.fixture(scope="module")
def breast_w():
    path = DATA_DIR / "breast-w.csv"
    if not path.exists():
        pytest.skip("data/breast-w.csv not present")
    table = read_table(path, "Class")
    return {seed: prepare(table, seed=seed, name="breast-w") for seed in SEEDS}


@pytest.fixture(scope="module")
def tic_tac_toe_seeds(tic_tac_toe_csv):
    table = read_table(tic_tac_toe_csv, "cls")
    return {seed: prepare(table, seed=seed, name="tic-tac-toe") for seed in SEEDS}


@pytest.fixture(scope="module")
def iris_seeds(iris_csv):
    table = read_table(iris_csv, "species")
    return {seed: prepare(table, seed=seed, name="iris") for seed in SEEDS}


def test_breast_w_reproduction(breast_w):
    start = time.perf_counter()
    auc, _, height = mean_reports(breast_w, "c45")
    assert auc == pytest.approx(0.968, abs=0.03)
    assert height == pytest.approx(3.5, abs=1.0)

    auc, _, height = mean_reports(breast_w, "ec45", tune=True)
    assert auc == pytest.approx(0.982, abs=0.03)
    assert height == pytest.approx(3.48, abs=1.0)

    auc, _, height = mean_reports(breast_w, "asr")
    assert auc == pytest.approx(0.967, abs=0.05)
    assert height == pytest.approx(4.08, abs=1.5)
    assert time.perf_counter() - start < 60


@pytest.mark.parametrize("dataset", [
    "tic_tac_toe_seeds",
    pytest.param("iris_seeds", marks=pytest.mark.xfail(strict=True, reason=LAMBDA_SATURATED)),
])
def test_enhanced_balances_cost_and_auc(dataset, request):
    prepared = request.getfixturevalue(dataset)
    enhanced_auc, enhanced_cost, _ = mean_reports(prepared, "ec45", tune=True)
    _, c45_cost, _ = mean_reports(prepared, "c45")
    asr_auc, _, _ = mean_reports(prepared, "asr")
    assert enhanced_cost <= c45_cost * 1.05
    assert enhanced_auc >= asr_auc - 0.02


def test_random_costs_favor_enhanced(tic_tac_toe_csv):
    table = read_table(tic_tac_toe_csv, "cls")
    prepared = {seed: prepare(table, cost_mode="random", seed=seed) for seed in SEEDS}
    _, enhanced_cost, _ = mean_reports(prepared, "ec45", tune=True)
    _, weighted_cost, _ = mean_reports(prepared, "c-c45")
    assert enhanced_cost <= weighted_cost


def test_audit_hundred_instances():
    start = time.perf_counter()
    for k in range(100):
        tiny = random_tiny(np.random.default_rng(k), max_objects=6, max_tests=6)
        result = submodularity_audit(tiny, COVERAGE_FUNCTIONS)
        assert result.passed, result.error_message
    assert time.perf_counter() - start < 30


def test_ratio_sweep_two_hundred():
    start = time.perf_counter()
    result = approx_ratio_sweep(seed=0, count=200, lambdas=(0.0, 1.0))
    assert result.passed, result.failures[:5]
    assert len(result.rows) == 400
    print(f"max greedy/optimal ratio {result.max_ratio:.4f}")
    assert time.perf_counter() - start < 120


def test_structural_equivalences(iris_seeds, tic_tac_toe_seeds, request):
    datasets = [iris_seeds[0], tic_tac_toe_seeds[0]]
    if (DATA_DIR / "breast-w.csv").exists():
        datasets.append(request.getfixturevalue("breast_w")[0])
    for prepared in datasets:
        instance = prepared.instance
        assert induce(instance, parse_tag("enhanced", 0.0)[0]) == induce(instance, parse_tag("asr")[0])

    for prepared in datasets[1:]:
        instance = prepared.instance
        c45_config = parse_tag("c45")[0]
        c45 = induce(instance, c45_config)
        enhanced = induce(instance, parse_tag("ec45", 1e9)[0])
        members = node_members(c45, instance)
        for node_id in sorted(members):
            node = c45.nodes[node_id]
            if node.is_leaf:
                continue
            other = enhanced.nodes.get(node_id)
            if other is not None and other.test == node.test:
                continue
            state = node_state(instance, members[node_id])
            gains = np.sort(score_candidates(instance, state, coverage_state(instance, state), c45_config).criterion)
            # a different choice is only allowed on a near tie, after which the trees diverge
            assert gains.size > 1 and gains[-1] - gains[-2] <= 1e-6
            break
