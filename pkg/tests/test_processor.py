import asyncio
import json

import numpy as np
import pandas as pd
import pytest

from core.dataset import EvalSplit, Instance, PreparedData
from core.errors import UnknownTagError
from core.processor import BenchPlan, DatasetSpec, run_bench, train_model


def small_plan(iris_csv, out_dir, **kwargs) -> BenchPlan:
    settings = dict(
        datasets=[DatasetSpec("iris", str(iris_csv), "species")],
        tags=["c45", "asr"],
        cost_modes=["unit"],
        seeds=[0, 1],
        lambda_policy="fixed",
        out_dir=str(out_dir),
    )
    settings.update(kwargs)
    return BenchPlan(**settings)


class TestTrainModel:
    def test_tuning_sets_lambda(self, iris_prepared):
        outcome = train_model(iris_prepared, "enhanced", tune=True)
        assert outcome.tuning is not None
        assert outcome.config.lam == outcome.tuning.chosen
        assert outcome.tree.meta["lam"] == outcome.tuning.chosen

    def test_tuning_ignored_for_baselines(self, iris_prepared):
        outcome = train_model(iris_prepared, "c45", tune=True)
        assert outcome.tuning is None
        assert outcome.tree.meta["tag"] == "c45"

    def test_prefix_prunes(self, iris_prepared):
        plain = train_model(iris_prepared, "c45")
        pruned = train_model(iris_prepared, "pc45")
        assert pruned.pruning is not None
        assert pruned.tree.size <= plain.tree.size

    def test_prune_leaf_tree_is_unchanged(self):
        prepared = PreparedData(
            instance=Instance.create([[0], [1]], [0, 0], classes=["a", "b"]),
            validation=EvalSplit(np.array([[0], [1]], dtype=np.int16), np.array([0, 1])),
            test=EvalSplit(np.array([[0]], dtype=np.int16), np.array([0])),
        )
        plain = train_model(prepared, "c45")
        pruned = train_model(prepared, "c45", prune_tree=True)
        assert pruned.tree == plain.tree
        assert pruned.tree.size == 1


class TestBenchPlan:
    def test_cells(self, iris_csv, tmp_path):
        plan = small_plan(iris_csv, tmp_path)
        cells = plan.cells()
        assert len(cells) == 4
        assert len({c.cell_id for c in cells}) == 4

    def test_validation(self, iris_csv, tmp_path):
        with pytest.raises(ValueError):
            small_plan(iris_csv, tmp_path, lambda_policy="sometimes")
        with pytest.raises(UnknownTagError):
            small_plan(iris_csv, tmp_path, tags=["id3"])
        with pytest.raises(ValueError):
            small_plan(iris_csv, tmp_path, cost_modes=["free"])

    def test_load_resolves_relative_paths(self, tmp_path):
        path = tmp_path / "plan.json"
        path.write_text(json.dumps({
            "datasets": [{"name": "d", "path": "data/d.csv", "label": "y"}],
            "tags": ["c45"],
        }))
        plan = BenchPlan.load(path)
        assert plan.datasets[0].path == str(tmp_path / "data" / "d.csv")
        assert plan.seeds == [0, 1, 2, 3, 4]
        assert BenchPlan.from_dict(plan.to_dict()) == plan


class TestRunBench:
    def test_matrix_and_resume(self, iris_csv, tmp_path):
        plan = small_plan(iris_csv, tmp_path / "out")
        outcome = asyncio.run(run_bench(plan, workers=2))
        assert outcome.success
        assert outcome.ran == 4 and outcome.skipped == 0

        results = tmp_path / "out" / "results.csv"
        frame = pd.read_csv(results)
        assert len(frame) == 4
        assert (frame["expected_cost"] == frame["expected_height"]).all()
        assert (tmp_path / "out" / "summary.json").exists()
        assert json.loads((tmp_path / "out" / "plan.json").read_text())["tags"] == ["c45", "asr"]
        assert not list((tmp_path / "out" / "cells").iterdir())

        frame.drop(index=0).to_csv(results, index=False)
        again = asyncio.run(run_bench(plan, workers=2))
        assert again.ran == 1 and again.skipped == 3
        rerun = pd.read_csv(results)
        assert len(rerun) == 4
        assert rerun[["dataset", "tag", "cost_mode", "seed"]].equals(frame[["dataset", "tag", "cost_mode", "seed"]])

    def test_second_plan_keeps_earlier_rows(self, iris_csv, tmp_path):
        out = tmp_path / "out"
        first = asyncio.run(run_bench(small_plan(iris_csv, out, tags=["c45"], seeds=[0]), workers=1))
        assert first.ran == 1

        second = asyncio.run(run_bench(small_plan(iris_csv, out, tags=["asr"], seeds=[0]), workers=1))
        assert second.ran == 1 and second.skipped == 0

        frame = pd.read_csv(out / "results.csv")
        assert sorted(zip(frame["tag"], frame["seed"])) == [("asr", 0), ("c45", 0)]
        summary = json.loads((out / "summary.json").read_text())
        assert sorted(g["tag"] for g in summary["groups"]) == ["asr", "c45"]

        third = asyncio.run(run_bench(small_plan(iris_csv, out, tags=["c45", "asr"], seeds=[0]), workers=1))
        assert third.ran == 0 and third.skipped == 2
        assert len(pd.read_csv(out / "results.csv")) == 2

    def test_failed_cells_are_reported(self, tmp_path):
        plan = BenchPlan(
            datasets=[DatasetSpec("missing", str(tmp_path / "missing.csv"), "y")],
            tags=["c45"],
            seeds=[0],
            lambda_policy="fixed",
            out_dir=str(tmp_path / "out"),
        )
        outcome = asyncio.run(run_bench(plan, workers=1))
        assert not outcome.success
        assert len(outcome.failures) == 1
        assert outcome.failures[0].error_message
