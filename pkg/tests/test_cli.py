import io
import json

import pytest

from linkscrub.cli.main import EXIT_INPUT_ERROR, EXIT_INVARIANT_VIOLATION, EXIT_OK, main
from linkscrub.features import read_feature_matrix
from linkscrub.forest import load_forest, read_predictions
from linkscrub.labels import read_labels
from linkscrub.urls import FilterList, FilterRule, parse_filter_list

TRACKER_URL = "https://px.t.example/c?uid=ABCDEFGH"


@pytest.fixture(autouse=True)
def small_forests(monkeypatch):
    monkeypatch.setenv("LINKSCRUB_TREE_COUNT", "5")
    monkeypatch.setenv("LINKSCRUB_FOLDS", "3")


@pytest.fixture
def matrix_path(corpus_dir):
    path = corpus_dir / "matrix.csv"
    assert main(["features", str(corpus_dir / "traces"), "--out", str(path)]) == EXIT_OK
    return path


@pytest.fixture
def forest_path(corpus_dir, matrix_path):
    path = corpus_dir / "forest.json"
    assert main(["train", str(matrix_path), str(corpus_dir / "labels.csv"), "--out", str(path)]) == EXIT_OK
    return path


@pytest.fixture
def list_path(tmp_path):
    path = tmp_path / "list.txt"
    path.write_text(FilterList(rules=[FilterRule(fqdn="px.t.example", key="uid")]).dumps(), encoding="utf-8")
    return path


def test_parse(corpus_dir, capsys, tmp_path):
    assert main(["parse", str(corpus_dir / "traces"), "--out", str(tmp_path / "normalized")]) == EXIT_OK

    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("synthetic-0000\tshop0.example\t")
    assert len(list((tmp_path / "normalized").glob("*.jsonl"))) == 6


def test_graph_files(corpus_dir, tmp_path):
    assert main(["graph", str(corpus_dir / "traces"), "--out", str(tmp_path / "graphs")]) == EXIT_OK
    assert (tmp_path / "graphs" / "synthetic-0000.graph").read_text(encoding="utf-8").startswith("# linkscrub graph")


def test_label(corpus_dir, capsys):
    out = corpus_dir / "derived.csv"
    args = [
        "label",
        str(corpus_dir / "traces"),
        "--request-rules",
        str(corpus_dir / "request_rules.txt"),
        "--cookie-purposes",
        str(corpus_dir / "cookie_purposes.csv"),
        "--curated",
        str(corpus_dir / "curated.txt"),
        "--out",
        str(out),
    ]

    assert main(args) == EXIT_OK
    assert read_labels(out)
    assert "conflicts:" in capsys.readouterr().out


def test_train_and_predict(corpus_dir, matrix_path, forest_path, tmp_path):
    predictions = tmp_path / "predictions.csv"

    assert len(load_forest(forest_path).trees) == 5
    assert main(["predict", str(forest_path), str(matrix_path), "--out", str(predictions)]) == EXIT_OK
    assert len(read_predictions(predictions)) == len(read_feature_matrix(matrix_path))

    filter_list = tmp_path / "list.txt"
    assert main(["emit-list", str(predictions), "--out", str(filter_list), "--model-version", "m1"]) == EXIT_OK
    assert all(rule.model_version == "m1" for rule in parse_filter_list(filter_list.read_text(encoding="utf-8")))
    assert main(["export-adblock", str(filter_list), "--out", str(tmp_path / "adblock.txt")]) == EXIT_OK


def test_train_prints_importance(corpus_dir, matrix_path, tmp_path, capsys):
    args = ["train", str(matrix_path), str(corpus_dir / "labels.csv"), "--out", str(tmp_path / "f.json")]

    assert main([*args, "--importance", "--max-depth", "3", "--features-per-split", "4"]) == EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == len(read_feature_matrix(matrix_path).feature_names)


def test_cross_validation(corpus_dir, matrix_path, capsys):
    assert main(["cv", str(matrix_path), str(corpus_dir / "labels.csv")]) == EXIT_OK
    assert capsys.readouterr().out.startswith("3-fold cross validation")

    assert main(["cv", str(matrix_path), str(corpus_dir / "labels.csv"), "--json", "--folds", "2"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["k"] == 2


def test_sanitize_arguments(list_path, capsys):
    assert main(["sanitize", str(list_path), TRACKER_URL, "--site", "a.example"]) == EXIT_OK

    sanitized = capsys.readouterr().out.strip()
    assert sanitized.startswith("https://px.t.example/c?uid=")
    assert len(sanitized) == len(TRACKER_URL)
    assert sanitized != TRACKER_URL


def test_sanitize_stdin(list_path, capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO(f"{TRACKER_URL}\n\nhttps://other.example/?uid=1\n"))

    assert main(["sanitize", str(list_path), "--site", "a.example", "--mode", "strip"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["https://px.t.example/c", "https://other.example/?uid=1"]


def test_generate(tmp_path, capsys):
    assert main(["--seed", "3", "generate", str(tmp_path / "out"), "--sites", "2"]) == EXIT_OK

    assert len(list((tmp_path / "out" / "traces").glob("*.jsonl"))) == 2
    assert (tmp_path / "out" / "labels.csv").exists()
    assert capsys.readouterr().out.startswith("2 traces in ")


def test_evade(corpus_dir, tmp_path):
    args = ["evade", "split", str(corpus_dir / "traces"), str(tmp_path / "split"), "--labels"]

    assert main([*args, str(corpus_dir / "labels.csv")]) == EXIT_OK
    assert len(list((tmp_path / "split" / "traces").glob("*.jsonl"))) == 6
    assert (tmp_path / "split" / "origins.csv").read_text(encoding="utf-8").startswith("site,fqdn,key,origins\n")
    assert read_labels(tmp_path / "split" / "labels.csv")


def test_stats(corpus_dir, capsys):
    assert main(["stats", str(corpus_dir / "traces"), str(corpus_dir / "labels.csv"), "--top", "3"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("sites: 6 ")


def test_robustness(corpus_dir, capsys):
    assert main(["robustness", str(corpus_dir / "traces"), str(corpus_dir / "labels.csv")]) == EXIT_OK
    assert "combine:" in capsys.readouterr().out


def test_format_version_mismatch_is_an_invariant_violation(corpus_dir, capsys):
    args = ["--format-version", "0", "features", str(corpus_dir / "traces")]

    assert main(args) == EXIT_INVARIANT_VIOLATION
    assert capsys.readouterr().err.startswith("error: ")


@pytest.mark.parametrize(
    "args",
    [
        ["parse", "missing-directory"],
        ["no-such-command"],
        ["--threshold", "2", "parse", "."],
        ["sanitize", "missing-list.txt", TRACKER_URL, "--site", "a.example"],
    ],
)
def test_bad_input_exits_with_one(args):
    assert main(args) == EXIT_INPUT_ERROR


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "linkscrub" in capsys.readouterr().out
