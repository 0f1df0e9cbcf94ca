from dataclasses import replace

import numpy as np
import pytest

from unitfinder_cli.constants import MODE_EVERY, MODE_SINGLE, TRACE_COLUMNS
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core.hard_concrete import HardConcreteParams
from unitfinder_cli.core.intervention import (
    InterventionDataset,
    InterventionParams,
    apply_mask,
    forward_with_intervention,
    intervened_logits,
    target_logits,
    trace_rows,
    write_trace,
)
from unitfinder_cli.errors import ConfigError, DataError, ShapeMismatchError


@pytest.mark.parametrize(
    "h, m, b, expected",
    [
        ((2.0, 3.0), (1.0, 0.0), (-1.0, -1.0), (-1.0, 3.0)),
        ((2.0, 3.0), (0.0, 0.0), (-1.0, -1.0), (2.0, 3.0)),
        ((0.2, -0.4), (1.0, 1.0), (0.5, 0.5), (0.5, 0.5)),
        ((1.0, 1.0), (0.5, 0.25), (0.0, -1.0), (0.5, 0.5)),
    ],
)
def test_apply_mask(h, m, b, expected):
    np.testing.assert_allclose(apply_mask(np.array(h), np.array(m), np.array(b)), expected)


def test_apply_mask_checks_lengths():
    with pytest.raises(ShapeMismatchError, match="apply_mask"):
        apply_mask(np.ones(3), np.ones(2), np.ones(3))


def test_baseline_is_clipped_and_checked():
    params = InterventionParams(np.zeros(3), np.array([2.0, -3.0, 0.5]))
    np.testing.assert_array_equal(params.baseline, [1.0, -1.0, 0.5])
    with pytest.raises(ShapeMismatchError):
        InterventionParams(np.zeros(3), np.zeros(2))
    with pytest.raises(ConfigError):
        InterventionParams(np.zeros(3), np.zeros(3), mode="sometimes")


@pytest.mark.parametrize("mode", [MODE_SINGLE, MODE_EVERY])
def test_zero_mask_reproduces_the_original_run(tiny_model, instance, mode):
    units = tiny_model.config.units
    params = InterventionParams(np.zeros(units), np.full(units, -1.0), mode)
    distribution, trace = forward_with_intervention(tiny_model, params, instance)
    assert trace.altered.tobytes() == trace.original.tobytes()
    assert trace.distributions.tobytes() == trace.original_distributions.tobytes()
    assert distribution.tobytes() == trace.original_distributions[-1].tobytes()


def test_single_mode_leaves_earlier_steps_alone(tiny_model, instance):
    units = tiny_model.config.units
    params = InterventionParams(np.ones(units), np.full(units, -1.0), MODE_SINGLE)
    _, trace = forward_with_intervention(tiny_model, params, instance)
    step = instance.intervention_position - 1
    np.testing.assert_array_equal(trace.altered[:step], trace.original[:step])
    np.testing.assert_array_equal(trace.distributions[:step], trace.original_distributions[:step])
    np.testing.assert_array_equal(trace.altered[step], np.full(units, -1.0))
    assert not np.allclose(trace.distributions[-1], trace.original_distributions[-1])


def test_single_mode_alters_selected_units_only(tiny_model, instance):
    units = tiny_model.config.units
    mask = np.zeros(units)
    mask[[1, 5]] = 1.0
    baseline = np.linspace(-1, 1, units)
    _, trace = forward_with_intervention(tiny_model, InterventionParams(mask, baseline), instance)
    step = instance.intervention_position - 1
    np.testing.assert_array_equal(trace.altered[step, [1, 5]], baseline[[1, 5]])
    keep = mask == 0
    np.testing.assert_array_equal(trace.altered[step, keep], trace.original[step, keep])


def test_every_mode_alters_each_prefix_step(tiny_model, instance):
    units = tiny_model.config.units
    params = InterventionParams(np.ones(units), np.zeros(units), MODE_EVERY)
    _, trace = forward_with_intervention(tiny_model, params, instance)
    np.testing.assert_array_equal(trace.altered, np.zeros_like(trace.altered))


def test_distribution_needs_a_sample_for_hard_concrete_masks(tiny_model, instance):
    units = tiny_model.config.units
    params = InterventionParams(HardConcreteParams.initial(units), np.zeros(units))
    with pytest.raises(ConfigError):
        forward_with_intervention(tiny_model, params, instance)
    distribution, _ = forward_with_intervention(tiny_model, params, instance, mask=np.zeros(units))
    assert distribution.sum() == pytest.approx(1.0)


def test_intervention_must_precede_target(tiny_model, instance):
    units = tiny_model.config.units
    params = InterventionParams(np.zeros(units), np.zeros(units))
    # Bypass the instance's own validation
    broken = replace(instance)
    object.__setattr__(broken, "intervention_position", broken.target_position)
    with pytest.raises(DataError):
        forward_with_intervention(tiny_model, params, broken)


def test_batched_run_matches_single_instances(tiny_model, agreement_corpus):
    instances = agreement_corpus[1][:4]
    units = tiny_model.config.units
    mask = np.zeros(units)
    mask[:3] = 1.0
    baseline = np.full(units, 0.5)
    data = InterventionDataset.build(tiny_model, instances, MODE_SINGLE)
    batch = data.batch(tiny_model, range(len(instances)))
    logits = target_logits(batch, intervened_logits(tiny_model, batch, mask, baseline))
    batched = ad.softmax(logits)
    for row, instance in enumerate(instances):
        single, _ = forward_with_intervention(tiny_model, InterventionParams(mask, baseline), instance)
        np.testing.assert_allclose(batched[row], single, atol=1e-12)
        np.testing.assert_allclose(
            batch.original_distributions[len(instance.prefix) - 1, row], data.original_distributions[row][-1]
        )


def test_dataset_rejects_unknown_tokens(tiny_model, instance):
    with pytest.raises(DataError):
        InterventionDataset.build(tiny_model, [replace(instance, t="zzz")], MODE_SINGLE)


def test_trace_rows_cover_every_prefix_step(tiny_model, instance, tmp_path):
    units = tiny_model.config.units
    params = InterventionParams(np.eye(units)[0], np.zeros(units))
    _, trace = forward_with_intervention(tiny_model, params, instance)
    vocabulary = tiny_model.vocabulary
    rows = trace_rows(trace, [0, 3], vocabulary.id(instance.d), vocabulary.id(instance.t))
    assert len(rows) == (instance.target_position - 1) * 2
    assert [row["step"] for row in rows[:4]] == [1, 1, 2, 2]
    assert rows[0]["token"] == instance.tokens[0]

    path = write_trace(tmp_path / "trace.tsv", rows)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].split("\t") == list(TRACE_COLUMNS)
    assert len(lines) == len(rows) + 1
