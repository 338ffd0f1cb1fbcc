"""
Shared fixtures: hand-built instances, generated tic-tac-toe, iris from
scikit-learn.
"""
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from core.dataset import Instance, prepare, read_table

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


def pytest_addoption(parser):
    parser.addoption("--run-acceptance", action="store_true", default=False, help="run dataset-level gates")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-acceptance"):
        return
    skip = pytest.mark.skip(reason="needs --run-acceptance")
    for item in items:
        if "acceptance" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def two_split_instance() -> Instance:
    """
    100 rows, 50 per class. Test 0 separates 24 pure rows from (26, 50);
    tests 1 and 2 both split into (25, 25) / (25, 25).
    """
    return Instance.create(
        matrix=[
            [1, 1, 1],
            [1, 0, 0],
            [0, 1, 1],
            [0, 0, 0],
            [0, 1, 0],
            [0, 0, 1],
        ],
        labels=[0, 0, 0, 0, 1, 1],
        weights=[12, 12, 13, 13, 25, 25],
        classes=["A", "B"],
    )


@pytest.fixture
def four_objects() -> Instance:
    """Four uniform objects labelled A, A, B, B; test 0 splits {x0, x1} from {x2, x3}."""
    return Instance.create(
        matrix=[[0, 0], [0, 1], [1, 0], [1, 1]],
        labels=[0, 0, 1, 1],
        classes=["A", "B"],
    )


@pytest.fixture
def mixed_four() -> Instance:
    """Four uniform objects labelled A, A, B, B; test 0 groups {x0, x2} and {x1, x3}."""
    return Instance.create(
        matrix=[[0, 0], [1, 0], [0, 1], [1, 1]],
        labels=[0, 0, 1, 1],
        classes=["A", "B"],
    )


def tic_tac_toe_frame() -> pd.DataFrame:
    """All 958 legal end boards with x moving first; label positive when x wins."""
    lines = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]

    def winner(board):
        for a, b, c in lines:
            if board[a] != "b" and board[a] == board[b] == board[c]:
                return board[a]
        return None

    boards = {}

    def play(board, player):
        won = winner(board)
        if won or "b" not in board:
            boards[tuple(board)] = "positive" if won == "x" else "negative"
            return
        for square in range(9):
            if board[square] == "b":
                board[square] = player
                play(board, "o" if player == "x" else "x")
                board[square] = "b"

    play(["b"] * 9, "x")
    squares = ["tl", "tm", "tr", "ml", "mm", "mr", "bl", "bm", "br"]
    rows = [dict(zip(squares, board), cls=label) for board, label in sorted(boards.items())]
    return pd.DataFrame(rows, columns=squares + ["cls"])


@pytest.fixture(scope="session")
def tic_tac_toe_csv(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "tic-tac-toe.csv"
    tic_tac_toe_frame().to_csv(path, index=False)
    return path


@pytest.fixture(scope="session")
def iris_csv(tmp_path_factory) -> Path:
    from sklearn.datasets import load_iris

    bunch = load_iris(as_frame=True)
    frame = bunch.frame.rename(columns={"target": "species"})
    frame["species"] = [bunch.target_names[t] for t in bunch.target]
    path = tmp_path_factory.mktemp("data") / "iris.csv"
    frame.to_csv(path, index=False)
    return path


@pytest.fixture(scope="session")
def iris_prepared(iris_csv):
    return prepare(read_table(iris_csv, "species"), bins=5, theta=0.005, seed=0, name="iris")


@pytest.fixture(scope="session")
def tic_tac_toe_prepared(tic_tac_toe_csv):
    return prepare(read_table(tic_tac_toe_csv, "cls"), theta=0.005, seed=0, name="tic-tac-toe")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
