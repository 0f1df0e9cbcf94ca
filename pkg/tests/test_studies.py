import pytest
from rich.console import Console

from unitfinder_cli.app.report import (
    COMPARISON_COLUMNS,
    PREVALENCE_COLUMNS,
    comparison_summary,
    comparison_table,
    prevalence_rows,
    prevalence_table,
    print_tables,
    runs_table,
    summary_table,
)
from unitfinder_cli.app.search import SearchConfig, SearchResult, aggregate_runs, units_by_layer
from unitfinder_cli.app.studies import ComparisonRow, compare_estimators, robustness
from unitfinder_cli.constants import ESTIMATOR_HARD_CONCRETE, ESTIMATOR_REINFORCE
from unitfinder_cli.core.lstm_lm import TrainingConfig
from unitfinder_cli.lib.results import strip_timing


def _result(run_id, units, direction="to-plural", n_units=None):
    return SearchResult(
        run_id=run_id,
        estimator=ESTIMATOR_HARD_CONCRETE,
        mode="single",
        direction=direction,
        seed=0,
        units=tuple(units),
        units_by_layer=units_by_layer(units, 8),
        baselines=tuple(-0.5 for _ in units),
        accuracy=0.9,
        n_units=len(units) if n_units is None else n_units,
        mean_kl=0.1,
        expected_c0=1.0,
        budget=0.8,
        steps=5,
        epochs=1,
        converged=False,
        n_train=10,
        n_eval=5,
    )


def _row(estimator, accuracy, units, trial=0):
    return ComparisonRow(estimator, 0.02, trial, 0, accuracy, units, 10, 1, False, 2.0)


def test_prevalence_rows_follow_prevalence():
    aggregate = aggregate_runs([_result("a", [9]), _result("b", [9, 2]), _result("c", [9], "to-singular")])
    rows = prevalence_rows(aggregate)
    assert [(row["unit"], row["direction"]) for row in rows] == [(9, "to-plural"), (9, "to-singular"), (2, "to-plural")]
    assert rows[0]["prevalence"] == 1.0
    assert (rows[0]["layer"], rows[0]["index"]) == (1, 1)
    assert set(rows[0]) == set(PREVALENCE_COLUMNS)


def test_comparison_summary_groups_by_estimator():
    rows = [
        _row(ESTIMATOR_HARD_CONCRETE, 0.8, 2),
        _row(ESTIMATOR_REINFORCE, 0.4, 6),
        _row(ESTIMATOR_HARD_CONCRETE, 1.0, 4, trial=1),
    ]
    summary = comparison_summary(rows)
    assert [s["estimator"] for s in summary] == [ESTIMATOR_HARD_CONCRETE, ESTIMATOR_REINFORCE]
    assert summary[0]["accuracy"] == pytest.approx(0.9)
    assert summary[0]["units"] == 3.0 and summary[0]["runs"] == 2
    assert set(summary[0]) == set(COMPARISON_COLUMNS)


def test_tables_render():
    results = [_result("a", [9]), _result("b", [], n_units=0), _result("c", [0, 1, 2, 9])]
    aggregate = aggregate_runs(results)
    console = Console(record=True, width=160)
    print_tables(
        runs_table(results),
        prevalence_table(aggregate, limit=2),
        summary_table(aggregate),
        comparison_table([_row(ESTIMATOR_REINFORCE, 0.5, 3)]),
        console=console,
    )
    text = console.export_text()
    assert "degenerate (empty mask)" in text
    assert "over budget" in text
    assert "Estimator comparison" in text
    assert "67%" in text


def test_compare_estimators_pairs_seeds(tiny_model, agreement_corpus):
    train, evaluation = agreement_corpus
    config = SearchConfig(epochs=1, batch_size=12, direction="any")
    rows = compare_estimators(tiny_model, train, evaluation, [0.25], config, trials=2)
    assert [(r.estimator, r.trial) for r in rows] == [
        (ESTIMATOR_HARD_CONCRETE, 0),
        (ESTIMATOR_REINFORCE, 0),
        (ESTIMATOR_HARD_CONCRETE, 1),
        (ESTIMATOR_REINFORCE, 1),
    ]
    assert rows[0].seed == rows[1].seed != rows[2].seed
    assert all(r.alpha == 0.25 and r.steps == 2 for r in rows)

    again = compare_estimators(tiny_model, train, evaluation, [0.25], config, trials=2)
    assert [strip_timing(r.to_record()) for r in again] == [strip_timing(r.to_record()) for r in rows]


def test_robustness_trains_one_model_per_seed(agreement_corpus):
    train, evaluation = agreement_corpus
    study = robustness(
        train,
        evaluation,
        lm_seeds=[0, 1],
        repeats=2,
        lm_options={"hidden_size": 8, "embedding_size": 4},
        training=TrainingConfig(epochs=1, batch_size=12),
        config=SearchConfig(epochs=1, batch_size=12, direction="any"),
    )
    assert sorted(study.results) == [0, 1]
    assert [r.run_id for r in study.results[1]] == ["lm1-0", "lm1-1"]
    assert study.aggregate.runs == 4
    assert all(0.0 <= accuracy <= 1.0 for accuracy in study.lm_accuracy.values())
    assert study.to_record()["lm_seeds"] == [0, 1]
