import numpy as np
import pytest

from unitfinder_cli.app.search import (
    SearchConfig,
    SearchResult,
    aggregate_runs,
    ascend_multipliers,
    constraint_violations,
    evaluate_mask,
    initial_state,
    lagrangian_step,
    make_result,
    prepare_instances,
    run_search,
    trace_objective,
    units_by_layer,
)
from unitfinder_cli.app.search import _Stability
from unitfinder_cli.constants import MODE_EVERY, MODE_SINGLE
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core import hard_concrete as hc
from unitfinder_cli.core.hard_concrete import prob_nonzero
from unitfinder_cli.core.intervention import InterventionDataset
from unitfinder_cli.errors import ConfigError, DataError


def _result(run_id: str, units, direction: str = "to-plural", accuracy: float = 0.5) -> SearchResult:
    units = tuple(units)
    return SearchResult(
        run_id=run_id,
        estimator="hard-concrete",
        mode=MODE_SINGLE,
        direction=direction,
        seed=0,
        units=units,
        units_by_layer=units_by_layer(units, 8),
        baselines=tuple(0.1 * u for u in units),
        accuracy=accuracy,
        n_units=len(units),
        mean_kl=0.01,
        expected_c0=float(len(units)),
        budget=0.8,
        steps=10,
        epochs=1,
        converged=False,
        n_train=24,
        n_eval=12,
        seconds=1.0,
    )


@pytest.fixture()
def eval_data(tiny_model, agreement_corpus):
    instances = prepare_instances(tiny_model, agreement_corpus[1], "any")
    return InterventionDataset.build(tiny_model, instances, MODE_SINGLE)


@pytest.mark.parametrize(
    "changes",
    [
        {"alpha": 0.0},
        {"alpha": 1.5},
        {"beta": 0.0},
        {"learning_rate": -1.0},
        {"epochs": 0},
        {"mode": "sometimes"},
        {"direction": "to-nowhere"},
        {"estimator": "gumbel"},
        {"temperature": 0.0},
    ],
)
def test_config_validation(changes):
    with pytest.raises(ConfigError):
        SearchConfig(**changes)


def test_initial_state_matches_initial_probability():
    config = SearchConfig(initial_probability=0.3)
    state = initial_state(12, config)
    np.testing.assert_allclose(prob_nonzero(config.distribution(state.location)), 0.3)
    np.testing.assert_array_equal(state.baseline, np.zeros(12))
    np.testing.assert_array_equal(state.lambdas, [0.0, 0.0])


def test_multipliers_ascend_on_violations_only():
    lambdas = ascend_multipliers(np.array([0.5, 0.2]), (2.0, -1.0), 0.1)
    np.testing.assert_allclose(lambdas, [0.7, 0.1])
    assert np.all(ascend_multipliers(np.array([0.0, 0.05]), (-3.0, -1.0), 0.1) == 0.0)


def test_zero_learning_rates_freeze_the_state(tiny_model, eval_data):
    config = SearchConfig(learning_rate=0.0, lambda_learning_rate=0.0, lambda_init=0.3)
    state = initial_state(tiny_model.units, config)
    batch = eval_data.batch(tiny_model, range(4))
    updated, diagnostics = lagrangian_step(state, batch, tiny_model, config, np.random.default_rng(0))
    np.testing.assert_array_equal(updated.location, state.location)
    np.testing.assert_array_equal(updated.baseline_logits, state.baseline_logits)
    np.testing.assert_array_equal(updated.lambdas, state.lambdas)
    assert updated.step == 1
    assert updated.optimizer is state.optimizer and state.optimizer.step_count == 0
    assert diagnostics.rows == 4


def test_step_moves_the_mask_and_the_multipliers(tiny_model, eval_data):
    config = SearchConfig(alpha=0.05)
    state = initial_state(tiny_model.units, config)
    batch = eval_data.batch(tiny_model, range(4))
    updated, diagnostics = lagrangian_step(state, batch, tiny_model, config, np.random.default_rng(0))
    assert not np.array_equal(updated.location, state.location)
    # half of the units are expected on, far above the budget
    assert diagnostics.c0 == pytest.approx(0.5 * tiny_model.units)
    assert updated.lambdas[0] > 0.0
    assert 0 <= diagnostics.flips <= diagnostics.rows


def test_constraint_violations_are_relative_and_clipped():
    config = SearchConfig(alpha=0.25, beta=0.5)
    assert constraint_violations(6.0, 0.25, 16, config) == pytest.approx((0.5, -0.5))
    assert constraint_violations(100.0, 10.0, 16, config) == (1.0, 1.0)
    # budgets below one unit are measured in units
    assert constraint_violations(0.0, 0.0, 16, SearchConfig(alpha=0.05)) == pytest.approx((-0.8, -1.0))


def test_step_leaves_the_earlier_state_alone(tiny_model, eval_data):
    config = SearchConfig()
    state = initial_state(tiny_model.units, config)
    location = state.location.copy()
    batch = eval_data.batch(tiny_model, range(4))
    updated, _ = lagrangian_step(state, batch, tiny_model, config, np.random.default_rng(0))
    assert state.optimizer.step_count == 0 and not state.optimizer.first_moment
    assert updated.optimizer.step_count == 1
    np.testing.assert_array_equal(state.location, location)


@pytest.mark.parametrize("mode", [MODE_SINGLE, MODE_EVERY])
def test_objective_gradients_match_finite_differences(tiny_model, agreement_corpus, mode):
    instances = prepare_instances(tiny_model, agreement_corpus[1], "any")[:3]
    batch = InterventionDataset.build(tiny_model, instances, mode).batch(tiny_model, range(3))
    config = SearchConfig(kl_weight=1.0, mode=mode)
    rng = np.random.default_rng(5)
    units = tiny_model.units
    inputs = {"location": rng.normal(0.0, 1.0, units), "baseline_logits": rng.normal(0.0, 0.5, units)}
    noise = hc.draw_noise(rng, (len(batch), units))
    evaluation = trace_objective(tiny_model, batch, config, np.array([0.7, 0.3]), noise, **inputs)
    assert float(evaluation["kl"]) > 0.0
    for name in inputs:
        assert ad.finite_difference_check(evaluation.record, "objective", name, inputs) < 1e-4


def _stability(**changes):
    options = {
        "patience": 2,
        "accuracy_tolerance": 0.01,
        "c0_tolerance": 0.5,
        "budget": 4.0,
        "min_epochs": 5,
        "min_accuracy": 0.5,
    }
    return _Stability(**{**options, **changes})


def test_settled_run_stops_after_min_epochs():
    stability = _stability()
    history = [(0.6, 3.0), (0.9, 3.0), (0.9, 3.0), (0.9, 3.1)]
    assert not any(stability.update(epoch, *values) for epoch, values in enumerate(history, 1))
    assert stability.update(5, 0.9, 3.0)


@pytest.mark.parametrize(
    "accuracy, c0",
    [
        (0.0, 1.0),  # flat at no flips
        (0.9, 9.0),  # over budget
    ],
)
def test_flat_run_keeps_going(accuracy, c0):
    stability = _stability()
    assert not any(stability.update(epoch, accuracy, c0) for epoch in range(1, 40))


def test_improving_accuracy_keeps_going():
    stability = _stability(min_epochs=0)
    assert not any(stability.update(epoch, 0.5 + 0.02 * epoch, 3.0) for epoch in range(1, 20))


def test_zero_mask_changes_nothing(tiny_model, eval_data):
    units = tiny_model.units
    report = evaluate_mask(tiny_model, eval_data, np.zeros(units), np.zeros(units))
    assert report.accuracy == 0.0
    assert report.mean_kl == pytest.approx(0.0, abs=1e-12)
    assert len(report) == len(eval_data)


def test_evaluation_needs_instances(tiny_model):
    empty = InterventionDataset.build(tiny_model, [], MODE_EVERY)
    with pytest.raises(DataError, match="empty evaluation set"):
        evaluate_mask(tiny_model, empty, np.zeros(16), np.zeros(16))


def test_full_mask_breaks_the_budget(tiny_model, eval_data):
    units = tiny_model.units
    config = SearchConfig()
    mask = np.ones(units)
    report = evaluate_mask(tiny_model, eval_data, mask, np.full(units, -1.0))
    result = make_result(tiny_model, config, mask, np.full(units, -1.0), report, "full")
    assert result.n_units == units
    assert result.constraint_violated and not result.degenerate
    assert result.units_by_layer[8] == (1, 0)


def test_empty_mask_is_degenerate(tiny_model, eval_data):
    units = tiny_model.units
    report = evaluate_mask(tiny_model, eval_data, np.zeros(units), np.zeros(units))
    result = make_result(tiny_model, SearchConfig(), np.zeros(units), np.zeros(units), report, "empty")
    assert result.degenerate and not result.constraint_violated


def test_result_record_round_trip():
    result = _result("run-1", [3, 9])
    record = result.to_record()
    assert record["units_by_layer"] == [[0, 3], [1, 1]]
    assert record["degenerate"] is False
    assert SearchResult.from_record(record) == result


def test_result_record_needs_every_field():
    record = _result("run-1", [3]).to_record()
    del record["accuracy"]
    with pytest.raises(DataError, match="accuracy"):
        SearchResult.from_record(record)


def test_result_mask_and_baseline():
    result = _result("run-1", [1, 4])
    np.testing.assert_array_equal(result.mask(6), [0, 1, 0, 0, 1, 0])
    np.testing.assert_allclose(result.baseline_vector(6), [0, 0.1, 0, 0, 0.4, 0])


def test_prevalence_counts_runs():
    results = [_result(f"run-{j}", [3] if j < 11 else [5]) for j in range(25)]
    aggregate = aggregate_runs(results)
    assert aggregate.prevalence[3] == pytest.approx(0.44)
    assert list(aggregate.prevalence) == [5, 3]


def test_prevalence_of_disjoint_runs():
    aggregate = aggregate_runs([_result("a", [1]), _result("b", [2])])
    assert aggregate.prevalence == {1: 0.5, 2: 0.5}
    assert aggregate.locations == {1: (0, 1), 2: (0, 2)}


def test_aggregate_statistics():
    results = [
        _result("a", [1, 2], accuracy=0.6),
        _result("b", [1], accuracy=0.8),
        _result("c", [1], direction="to-singular", accuracy=1.0),
    ]
    aggregate = aggregate_runs(results)
    assert aggregate.accuracy == pytest.approx((0.8, np.std([0.6, 0.8, 1.0])))
    assert aggregate.baselines["to-plural"][1] == pytest.approx((0.1, 0.0))
    assert set(aggregate.baselines) == {"to-plural", "to-singular"}
    assert aggregate.to_record()["prevalence"]["1"] == 1.0


def test_aggregate_needs_results():
    with pytest.raises(DataError):
        aggregate_runs([])


def test_direction_without_instances(tiny_model, agreement_corpus):
    train, evaluation = agreement_corpus
    with pytest.raises(DataError, match="to-he"):
        run_search(tiny_model, train, evaluation, SearchConfig(direction="to-he", epochs=1))


@pytest.mark.parametrize("mode", [MODE_SINGLE, MODE_EVERY])
def test_short_search(tiny_model, agreement_corpus, mode):
    train, evaluation = agreement_corpus
    config = SearchConfig(epochs=2, batch_size=8, mode=mode, alpha=0.25, seed=2, direction="any")
    result = run_search(tiny_model, train, evaluation, config, run_id="short")
    assert result.run_id == "short"
    assert result.epochs == 2 and result.steps == 6
    assert result.n_train == len(train) and result.n_eval == len(evaluation)
    assert list(result.units) == sorted(result.units)
    assert all(-1.0 <= b <= 1.0 for b in result.baselines)
    assert 0.0 <= result.accuracy <= 1.0
    assert result.config["mode"] == mode

    again = run_search(tiny_model, train, evaluation, config, run_id="short")
    assert again.units == result.units and again.accuracy == result.accuracy
