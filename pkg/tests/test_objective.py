import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from unitfinder_cli.app.objective import (
    assign_contrast,
    assign_contrasts,
    batch_kl,
    batch_ratios,
    kl_retention_loss,
    ratio_loss,
    select_direction,
    target_attribute,
)
from unitfinder_cli.constants import MODE_EVERY, MODE_SINGLE, PLURAL, SINGULAR
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core.intervention import InterventionDataset, intervened_logits
from unitfinder_cli.core.lstm_lm import LanguageModel, LMParameters
from unitfinder_cli.errors import ConfigError, DataError


def _constant_model(model: LanguageModel, favoured: str = "") -> LanguageModel:
    """A model predicting the same distribution after every prefix, peaked at ``favoured``"""
    arrays = dict(LMParameters.zeros(model.config).arrays)
    if favoured:
        bias = np.zeros(model.config.vocab_size)
        bias[model.vocabulary.id(favoured)] = 5.0
        arrays["output.bias"] = bias
    return LanguageModel(model.config, LMParameters(arrays), model.vocabulary)


@pytest.mark.parametrize(
    "distribution, expected",
    [
        ((0.4, 0.2, 0.4), 2.0),
        ((0.3, 0.3, 0.4), 1.0),
        ((0.1, 0.4, 0.5), 0.25),
        ((0.0, 0.0, 1.0), 1.0),
    ],
)
def test_ratio_loss(distribution, expected):
    assert float(ratio_loss(np.array(distribution), 0, 1)) == pytest.approx(expected, rel=1e-6)


def test_ratio_loss_on_a_batch():
    distributions = np.array([[0.4, 0.2, 0.4], [0.1, 0.4, 0.5]])
    ratios = ratio_loss(distributions, np.array([0, 0]), np.array([1, 1]))
    np.testing.assert_allclose(ratios, [2.0, 0.25], rtol=1e-6)


def test_kl_retention_loss():
    loss = kl_retention_loss(np.array([[0.5, 0.5]]), np.array([[0.9, 0.1]]))
    assert float(loss) == pytest.approx(0.5108, abs=1e-4)
    same = np.array([[0.2, 0.8], [0.6, 0.4]])
    assert float(kl_retention_loss(same, same)) == pytest.approx(0.0, abs=1e-12)


def test_kl_weights_select_steps():
    original = np.array([[0.5, 0.5], [0.5, 0.5]])
    intervened = np.array([[0.9, 0.1], [0.5, 0.5]])
    assert float(kl_retention_loss(original, intervened, weights=[1.0, 0.0])) == pytest.approx(0.5108, abs=1e-4)
    assert float(kl_retention_loss(original, intervened)) == pytest.approx(0.2554, abs=1e-4)


distributions = arrays(np.float64, (2, 4), elements=st.floats(0.01, 1.0)).map(
    lambda x: x / x.sum(axis=-1, keepdims=True)
)


@given(original=distributions, intervened=distributions)
def test_kl_is_non_negative(original, intervened):
    assert float(kl_retention_loss(original, intervened)) >= -1e-8


def test_kl_gradient_matches_finite_differences():
    original = np.array([[0.2, 0.3, 0.5]])
    logits = np.array([[0.1, -0.4, 0.9]])
    tracer = ad.Tracer()
    node = tracer.input("logits", logits)
    tracer.output("kl", kl_retention_loss(original, ad.softmax(node)))
    error = ad.finite_difference_check(tracer.record(), "kl", "logits", {"logits": logits})
    assert error < 1e-4


def test_assign_contrast_keeps_preferred_form(tiny_model, instance):
    model = _constant_model(tiny_model, favoured=instance.d)
    assert assign_contrast(instance, model) == instance


def test_assign_contrast_swaps_dispreferred_form(tiny_model, instance):
    model = _constant_model(tiny_model, favoured=instance.t)
    assigned = assign_contrast(instance, model)
    assert (assigned.d, assigned.t) == (instance.t, instance.d)


def test_assign_contrast_breaks_ties_by_token_id(tiny_model, instance):
    model = _constant_model(tiny_model)
    assigned = assign_contrast(instance, model)
    ids = model.vocabulary.id(assigned.d), model.vocabulary.id(assigned.t)
    assert ids[0] < ids[1]


def test_assign_contrasts_of_nothing(tiny_model):
    assert assign_contrasts(tiny_model, []) == []


def test_target_attribute(instance):
    assert target_attribute(instance, instance.d) == instance.attribute
    assert target_attribute(instance, instance.t) == (PLURAL if instance.attribute == SINGULAR else SINGULAR)
    with pytest.raises(DataError):
        target_attribute(instance, "zzz")


def test_select_direction(agreement_corpus):
    generated = agreement_corpus[1]
    assigned = [g.swapped() if j % 2 else g for j, g in enumerate(generated)]
    assert select_direction(generated, assigned, "any") == assigned

    to_plural = select_direction(generated, assigned, "to-plural")
    to_singular = select_direction(generated, assigned, "to-singular")
    assert len(to_plural) + len(to_singular) == len(assigned)
    for g, a in zip(generated, assigned):
        if a in to_plural:
            assert target_attribute(g, a.t) == PLURAL

    assert select_direction(generated, assigned, "to-she") == []
    with pytest.raises(ConfigError):
        select_direction(generated, assigned, "to-nowhere")


@pytest.mark.parametrize("mode", [MODE_SINGLE, MODE_EVERY])
def test_batch_terms_without_intervention(tiny_model, agreement_corpus, mode):
    instances = agreement_corpus[1][:5]
    data = InterventionDataset.build(tiny_model, instances, mode)
    batch = data.batch(tiny_model, range(len(instances)))
    units = tiny_model.config.units
    logits = intervened_logits(tiny_model, batch, np.zeros(units), np.zeros(units))

    assert float(batch_kl(batch, logits)) == pytest.approx(0.0, abs=1e-12)
    per_row = batch_kl(batch, logits, reduce=False)
    assert per_row.shape == (5,)

    vocabulary = tiny_model.vocabulary
    for row, instance in enumerate(instances):
        expected = ratio_loss(data.original_distributions[row][-1], vocabulary.id(instance.d), vocabulary.id(instance.t))
        assert batch_ratios(batch, logits)[row] == pytest.approx(float(expected), rel=1e-9)


def test_batch_kl_leaves_the_contrast_pair_out_at_the_target(tiny_model, agreement_corpus):
    instances = agreement_corpus[1][:4]
    batch = InterventionDataset.build(tiny_model, instances, MODE_SINGLE).batch(tiny_model, range(4))
    rows = np.arange(len(batch))
    swapped = []
    for step, original in enumerate(batch.original_distributions):
        logits = np.log(original + 1e-12)
        final = batch.last[step][:, 0] > 0
        d, t = logits[rows, batch.d_ids].copy(), logits[rows, batch.t_ids].copy()
        logits[final, batch.d_ids[final]] = t[final]
        logits[final, batch.t_ids[final]] = d[final]
        swapped.append(logits)

    assert float(batch_kl(batch, swapped)) == pytest.approx(0.0, abs=1e-8)

    shifted = [logits.copy() for logits in swapped]
    other = next(i for i in range(tiny_model.config.vocab_size) if i not in (*batch.d_ids, *batch.t_ids))
    for step, logits in enumerate(shifted):
        logits[batch.last[step][:, 0] > 0, other] += 3.0
    assert float(batch_kl(batch, shifted)) > 1e-3
