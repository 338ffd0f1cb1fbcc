import json
import logging

import pandas as pd
import pytest

from core.tree import TreeModel
from main import main
from utils.logger import set_level


@pytest.fixture
def iris_instance(iris_csv, tmp_path) -> str:
    out = tmp_path / "iris.instance.json"
    assert main(["prep", str(iris_csv), "--label", "species", "--name", "iris", "--out", str(out)]) == 0
    return str(out)


class TestPrep:
    def test_iris_shape_line(self, iris_csv, tmp_path, capsys):
        out = tmp_path / "iris.json"
        assert main(["prep", str(iris_csv), "--label", "species", "--name", "iris", "--out", str(out)]) == 0
        assert capsys.readouterr().out.strip() == "iris & 150 & 20 & 3"

    def test_tic_tac_toe_shape_line(self, tic_tac_toe_csv, tmp_path, capsys):
        out = tmp_path / "ttt.json"
        assert main(["prep", str(tic_tac_toe_csv), "--label", "cls", "--out", str(out)]) == 0
        assert capsys.readouterr().out.strip() == "tic-tac-toe & 958 & 27 & 2"

    def test_rerun_is_byte_identical(self, iris_csv, tmp_path):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        for out in (first, second):
            assert main(["prep", str(iris_csv), "--label", "species", "--costs", "random", "--out", str(out)]) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_bad_label(self, iris_csv, tmp_path):
        assert main(["prep", str(iris_csv), "--label", "nope", "--out", str(tmp_path / "x.json")]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["prep", str(tmp_path / "none.csv"), "--label", "y"]) == 2

    def test_bad_cost_mode(self, iris_csv, tmp_path):
        assert main(["prep", str(iris_csv), "--label", "species", "--costs", "free"]) == 2


class TestTrain:
    def test_unknown_tag(self, iris_instance):
        assert main(["train", iris_instance, "--tag", "id3"]) == 2
        assert main(["train", iris_instance, "--tag", "pasr"]) == 2

    def test_negative_lambda(self, iris_instance):
        assert main(["train", iris_instance, "--lambda", "-1"]) == 2

    def test_lambda_zero_matches_asr(self, iris_instance, tmp_path):
        enhanced, asr = tmp_path / "e.json", tmp_path / "a.json"
        assert main(["train", iris_instance, "--tag", "enhanced", "--lambda", "0", "--out", str(enhanced)]) == 0
        assert main(["train", iris_instance, "--tag", "asr", "--out", str(asr)]) == 0
        assert enhanced.read_bytes() == asr.read_bytes()

    def test_report_row_and_results(self, iris_instance, tmp_path, capsys):
        results = tmp_path / "results.csv"
        model = tmp_path / "m.json"
        code = main(["train", iris_instance, "--tag", "pc45", "--results", str(results), "--out", str(model)])
        assert code == 0
        row = json.loads(capsys.readouterr().out)
        assert row["tag"] == "pc45" and row["dataset"] == "iris"
        assert row["expected_cost"] == row["expected_height"]
        assert len(pd.read_csv(results)) == 1
        assert TreeModel.load(model).size == row["tree_size"]

    def test_default_model_path(self, iris_instance, tmp_path):
        assert main(["train", iris_instance, "--tag", "c45"]) == 0
        assert (tmp_path / "iris.instance.c45.model.json").exists()


class TestExport:
    @pytest.fixture
    def model(self, iris_instance, tmp_path) -> str:
        out = tmp_path / "model.json"
        assert main(["train", iris_instance, "--tag", "c45", "--out", str(out)]) == 0
        return str(out)

    def test_dot(self, model, tmp_path):
        out = tmp_path / "tree.dot"
        assert main(["export", model, "--format", "dot", "--out", str(out)]) == 0
        text = out.read_text()
        tree = TreeModel.load(model)
        assert text.startswith("digraph tree {")
        assert text.count("->") == tree.size - 1

    def test_json_round_trip(self, model, tmp_path):
        out = tmp_path / "copy.json"
        assert main(["export", model, "--format", "json", "--out", str(out)]) == 0
        assert TreeModel.load(out) == TreeModel.load(model)

    def test_unknown_format(self, model):
        assert main(["export", model, "--format", "png"]) == 2


class TestAudit:
    def test_default_run_passes(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        assert main(["audit", "--count", "5", "--seed", "1", "--out", str(out)]) == 0
        assert len(pd.read_csv(out)) == 5
        assert "max greedy/optimal ratio" in capsys.readouterr().out

    def test_self_test_fails(self, tmp_path, capsys):
        assert main(["audit", "--count", "10", "--self-test", "--out", str(tmp_path / "s.csv")]) == 1
        assert "AUDIT FAILED" in capsys.readouterr().out

    def test_lambda_list(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["audit", "--count", "3", "--lambdas", "0,1", "--out", str(out)]) == 0
        assert sorted(pd.read_csv(out)["lam"].unique()) == [0.0, 1.0]

    def test_random_cost_sweep(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["audit", "--count", "4", "--max-cost", "10", "--out", str(out)]) == 0
        assert len(pd.read_csv(out)) == 4


def test_bench_command(iris_csv, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({
        "datasets": [{"name": "iris", "path": str(iris_csv), "label": "species"}],
        "tags": ["c45", "asr"],
        "seeds": [0, 1],
        "lambda_policy": "fixed",
        "out_dir": str(tmp_path / "bench"),
    }))
    assert main(["bench", str(plan), "--workers", "2"]) == 0
    assert "4 run, 0 skipped, 0 failed" in capsys.readouterr().out
    assert len(pd.read_csv(tmp_path / "bench" / "results.csv")) == 4


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2


def test_log_level_flag(iris_csv, tmp_path):
    try:
        code = main(["--log-level", "warning", "prep", str(iris_csv), "--label", "species", "--out", str(tmp_path / "i.json")])
        assert code == 0
        assert logging.getLogger("frugaltree").level == logging.WARNING
    finally:
        set_level("INFO")
