import numpy as np
import pytest

from core.errors import FormatVersionError
from core.inducer import Algorithm, GreedyConfig, induce
from core.tree import TreeModel


@pytest.fixture
def stump(four_objects) -> TreeModel:
    return induce(four_objects, GreedyConfig(Algorithm.C45))


def test_stump_shape(stump):
    assert stump.size == 3
    assert stump.height == 1
    assert stump.n_leaves == 2
    assert [t for _, t in stump.test_sequence()] == [0, None, None]


def test_json_round_trip(stump, tmp_path):
    path = tmp_path / "stump.model.json"
    stump.save(path)
    loaded = TreeModel.load(path)
    assert loaded == stump
    assert loaded.to_dict() == stump.to_dict()


def test_load_rejects_other_version(stump):
    data = stump.to_dict()
    data["format_version"] = 99
    with pytest.raises(FormatVersionError):
        TreeModel.from_dict(data)


def test_dot_export(stump):
    dot = stump.to_dot()
    assert dot.count("[label=") == 5
    assert dot.count("->") == 2
    assert 'n0 [label="t0 (4)"]' in dot
    assert 'label="A (2)", style=rounded' in dot
    assert 'label="B (2)", style=rounded' in dot
    assert '-> n1 [label="0"]' in dot and '-> n2 [label="1"]' in dot


def test_predictions(stump, four_objects):
    proba = stump.predict_proba(four_objects.matrix)
    assert proba.argmax(axis=1).tolist() == [0, 0, 1, 1]
    assert proba.shape == (4, 2)
    assert np.allclose(proba.sum(axis=1), 1.0)


def test_unseen_outcome_follows_majority_child(stump):
    leaf, cost, unroutable = stump.assign(np.array([[2, 0], [1, 1]]))
    # equal child masses: the smaller outcome wins
    assert leaf.tolist() == [stump.nodes[0].children[0], stump.nodes[0].children[1]]
    assert cost.tolist() == [1.0, 1.0]
    assert unroutable == 1


def test_collapse_removes_descendants(stump):
    leaf = stump.collapse([0])
    assert leaf.size == 1
    assert leaf.nodes[0].is_leaf
    assert stump.size == 3


def test_majority_label_ties_to_smaller_class(stump):
    assert stump.collapse([0]).nodes[0].label == 0
