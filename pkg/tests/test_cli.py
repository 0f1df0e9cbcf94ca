import json

import pytest
from click.testing import CliRunner

from unitfinder_cli.__main__ import cli
from unitfinder_cli.constants import EXIT_DATA_ERROR, EXIT_SUCCESS, EXIT_USAGE, TRACE_COLUMNS
from unitfinder_cli.lib.checkpoint import load_checkpoint
from unitfinder_cli.lib.corpus import read_corpus
from unitfinder_cli.lib.results import read_records, read_results

SMALL_LM = ["--hidden-size", "8", "--embedding-size", "4", "--lm-epochs", "1", "--batch-size", "10"]


def _invoke(*args: str):
    return CliRunner().invoke(cli, list(args), catch_exceptions=False)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small corpora, a model trained for one epoch and the results of one search"""
    root = tmp_path_factory.mktemp("experiment")
    assert _invoke("gen-data", "-o", str(root), "--n-train", "30", "--n-eval", "10").exit_code == EXIT_SUCCESS
    result = _invoke(
        "train-lm",
        "-o",
        str(root),
        "--train-corpus",
        str(root / "agreement.train.tsv"),
        "--eval-corpus",
        str(root / "agreement.eval.tsv"),
        *SMALL_LM,
    )
    assert result.exit_code == EXIT_SUCCESS
    result = _invoke(
        "find-units",
        "-o",
        str(root),
        "-c",
        str(root / "lm.ckpt"),
        "--train-corpus",
        str(root / "agreement.train.tsv"),
        "--eval-corpus",
        str(root / "agreement.eval.tsv"),
        "--epochs",
        "1",
        "--repeats",
        "2",
        "--alpha",
        "0.25",
        "--direction",
        "any",
    )
    assert result.exit_code == EXIT_SUCCESS
    return root


def test_help_lists_every_command():
    result = _invoke("--help")
    assert result.exit_code == EXIT_SUCCESS
    for command in (
        "gen-data",
        "train-lm",
        "find-units",
        "evaluate",
        "trace",
        "compare-estimators",
        "report",
        "robustness",
    ):
        assert command in result.output


def test_gen_data_writes_both_splits(tmp_path):
    result = _invoke("gen-data", "-t", "gender", "-o", str(tmp_path), "--n-eval", "20", "-s", "3")
    assert result.exit_code == EXIT_SUCCESS
    assert len(read_corpus(tmp_path / "gender.eval.tsv")) == 20
    assert len(read_corpus(tmp_path / "gender.train.tsv")) == 2873 - 20


def test_gen_data_is_reproducible(tmp_path):
    for name in ("a", "b"):
        _invoke("gen-data", "-o", str(tmp_path / name), "--n-train", "20", "--n-eval", "5", "-s", "1")
    for split in ("train", "eval"):
        first = (tmp_path / "a" / f"agreement.{split}.tsv").read_bytes()
        assert first == (tmp_path / "b" / f"agreement.{split}.tsv").read_bytes()


def test_template_is_agreement_only(tmp_path):
    result = _invoke("gen-data", "-t", "gender", "-o", str(tmp_path), "--template", "adv")
    assert result.exit_code == EXIT_USAGE


def test_train_lm_outputs(workspace):
    model = load_checkpoint(workspace / "lm.ckpt")
    assert model.config.hidden_size == 8
    metrics = json.loads((workspace / "lm.ckpt.metrics.json").read_text(encoding="utf-8"))
    assert len(metrics["losses"]) == 1
    assert 0.0 <= metrics["preference_accuracy"] <= 1.0
    assert metrics["n_train"] == 30


def test_find_units_outputs(workspace):
    results = read_results(workspace / "agreement-single.results.jsonl")
    assert [r.run_id for r in results] == ["agreement-single-any-0", "agreement-single-any-1"]
    assert results[0].seed != results[1].seed
    assert (workspace / "agreement-single.prevalence.tsv").exists()
    aggregate = json.loads((workspace / "agreement-single.aggregate.json").read_text(encoding="utf-8"))
    assert aggregate["runs"] == 2


def test_find_units_searches_each_direction_by_default(workspace, tmp_path):
    result = _invoke(
        "find-units",
        "-o",
        str(tmp_path),
        "-c",
        str(workspace / "lm.ckpt"),
        "--train-corpus",
        str(workspace / "agreement.train.tsv"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
        "--epochs",
        "1",
        "--alpha",
        "0.25",
    )
    assert result.exit_code == EXIT_SUCCESS
    results = read_results(tmp_path / "agreement-single.results.jsonl")
    assert results
    for run in results:
        assert run.direction in ("to-plural", "to-singular")
        assert run.run_id == f"agreement-single-{run.direction}-0"


def test_evaluate_results(workspace):
    result = _invoke(
        "evaluate",
        "-o",
        str(workspace),
        "-c",
        str(workspace / "lm.ckpt"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
        "-r",
        str(workspace / "agreement-single.results.jsonl"),
    )
    assert result.exit_code == EXIT_SUCCESS
    records = read_records(workspace / "agreement-single.evaluation.jsonl")
    stored = read_results(workspace / "agreement-single.results.jsonl")
    assert [r["accuracy"] for r in records] == [r.accuracy for r in stored]


def test_evaluate_zero_mask(workspace, tmp_path):
    result = _invoke(
        "evaluate",
        "-o",
        str(tmp_path),
        "-c",
        str(workspace / "lm.ckpt"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
        "--zero-mask",
        "--mode",
        "every",
        "--direction",
        "any",
    )
    assert result.exit_code == EXIT_SUCCESS
    (record,) = read_records(tmp_path / "zero-mask.evaluation.jsonl")
    assert record["accuracy"] == 0.0
    assert record["mean_kl"] == pytest.approx(0.0, abs=1e-12)
    assert record["units"] == []


def test_evaluate_needs_exactly_one_source(workspace):
    result = _invoke(
        "evaluate",
        "-c",
        str(workspace / "lm.ckpt"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
    )
    assert result.exit_code == EXIT_USAGE


def test_trace(workspace):
    result = _invoke(
        "trace",
        "-o",
        str(workspace),
        "-c",
        str(workspace / "lm.ckpt"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
        "-r",
        str(workspace / "agreement-single.results.jsonl"),
        "--run-id",
        "agreement-single-any-1",
        "-i",
        "2",
    )
    assert result.exit_code == EXIT_SUCCESS
    lines = (workspace / "trace-agreement-single-any-1-2.tsv").read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t") == list(TRACE_COLUMNS)


def test_trace_unknown_run(workspace):
    result = _invoke(
        "trace",
        "-c",
        str(workspace / "lm.ckpt"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
        "-r",
        str(workspace / "agreement-single.results.jsonl"),
        "--run-id",
        "nope",
    )
    assert result.exit_code == EXIT_DATA_ERROR


def test_report_pools_result_files(workspace, tmp_path):
    result = _invoke(
        "report",
        "-o",
        str(tmp_path),
        "-l",
        "pooled",
        str(workspace / "agreement-single.results.jsonl"),
    )
    assert result.exit_code == EXIT_SUCCESS
    assert "Units found in 2 run(s)" in result.output
    assert (tmp_path / "pooled.prevalence.tsv").exists()
    assert json.loads((tmp_path / "pooled.aggregate.json").read_text(encoding="utf-8"))["runs"] == 2


def test_report_without_results(tmp_path):
    path = tmp_path / "other.jsonl"
    path.write_text('{"kind": "something else"}\n', encoding="utf-8")
    assert _invoke("report", str(path)).exit_code == EXIT_DATA_ERROR


def test_compare_estimators(workspace, tmp_path):
    result = _invoke(
        "compare-estimators",
        "-o",
        str(tmp_path),
        "-c",
        str(workspace / "lm.ckpt"),
        "--train-corpus",
        str(workspace / "agreement.train.tsv"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
        "--epochs",
        "1",
        "--trials",
        "1",
        "-a",
        "0.1",
        "-a",
        "0.2",
        "--direction",
        "any",
    )
    assert result.exit_code == EXIT_SUCCESS
    assert len(read_records(tmp_path / "comparison.jsonl")) == 4
    assert (tmp_path / "comparison.tsv").read_text(encoding="utf-8").startswith("estimator\talpha")


@pytest.mark.slow
def test_robustness(workspace, tmp_path):
    result = _invoke(
        "robustness",
        "-o",
        str(tmp_path),
        "--train-corpus",
        str(workspace / "agreement.train.tsv"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
        "--lm-seeds",
        "0",
        "--lm-seeds",
        "1",
        "--epochs",
        "1",
        "--direction",
        "any",
        *SMALL_LM,
    )
    assert result.exit_code == EXIT_SUCCESS
    summary = json.loads((tmp_path / "robustness.json").read_text(encoding="utf-8"))
    assert summary["lm_seeds"] == [0, 1]


def test_missing_checkpoint_file_is_a_usage_error(workspace, tmp_path):
    result = _invoke("find-units", "-c", str(tmp_path / "missing.ckpt"))
    assert result.exit_code == EXIT_USAGE


def test_no_checkpoint_at_all_is_a_config_error(tmp_path):
    result = _invoke("find-units", "-o", str(tmp_path))
    assert result.exit_code == EXIT_USAGE


def test_corrupted_checkpoint_is_a_data_error(workspace, tmp_path):
    broken = tmp_path / "broken.ckpt"
    broken.write_bytes(b"garbage\n")
    result = _invoke(
        "find-units",
        "-c",
        str(broken),
        "--train-corpus",
        str(workspace / "agreement.train.tsv"),
        "--eval-corpus",
        str(workspace / "agreement.eval.tsv"),
    )
    assert result.exit_code == EXIT_DATA_ERROR


def test_manifest_drives_a_command(workspace, tmp_path):
    manifest = tmp_path / "experiment.json"
    manifest.write_text(
        json.dumps(
            {
                "checkpoint": str(workspace / "lm.ckpt"),
                "eval_corpus": str(workspace / "agreement.eval.tsv"),
                "results_dir": "out",
                "mode": "single",
                "direction": "any",
            }
        ),
        encoding="utf-8",
    )
    result = _invoke("evaluate", "-m", str(manifest), "--zero-mask")
    assert result.exit_code == EXIT_SUCCESS
    assert (tmp_path / "out" / "zero-mask.evaluation.jsonl").exists()
