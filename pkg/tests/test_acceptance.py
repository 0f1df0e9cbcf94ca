"""End-to-end checks on language models trained with the default settings. Run with ``-m slow``."""

from dataclasses import replace

import numpy as np
import pytest

from unitfinder_cli.app.search import SearchConfig, run_search
from unitfinder_cli.app.studies import compare_estimators, robustness
from unitfinder_cli.constants import (
    DIRECTION_TO_SHE,
    ESTIMATOR_HARD_CONCRETE,
    ESTIMATOR_REINFORCE,
    MODE_EVERY,
)
from unitfinder_cli.core.lstm_lm import LMConfig, TrainingConfig, agreement_accuracy, train_lm
from unitfinder_cli.lib.datagen import build_vocabulary, generate_agreement_corpus, generate_gender_corpus
from unitfinder_cli.utils.task_runner import run_seed

pytestmark = pytest.mark.slow

# instances the masks are learned on; the whole eval split is scored
SEARCH_TRAIN = 2000
TRIALS = 3


def _train(corpus):
    train, evaluation = corpus
    vocabulary = build_vocabulary([*train, *evaluation])
    config = LMConfig(vocab_size=len(vocabulary))
    return train_lm(config, vocabulary, [instance.tokens for instance in train], TrainingConfig()).model


@pytest.fixture(scope="module")
def agreement():
    return generate_agreement_corpus(0)


@pytest.fixture(scope="module")
def agreement_model(agreement):
    return _train(agreement)


def test_trained_model_prefers_the_grammatical_form(agreement_model, agreement):
    assert agreement_accuracy(agreement_model, agreement[1]) >= 0.9


def test_single_step_search_flips_most_instances(agreement_model, agreement):
    train, evaluation = agreement
    result = run_search(agreement_model, train[:SEARCH_TRAIN], evaluation, SearchConfig())
    assert result.budget <= 8
    assert result.accuracy >= 0.8
    assert 1 <= result.n_units <= 0.05 * agreement_model.units


def test_every_step_search_flips_nearly_all_instances(agreement_model, agreement):
    train, evaluation = agreement
    result = run_search(agreement_model, train[:SEARCH_TRAIN], evaluation, SearchConfig(mode=MODE_EVERY))
    assert result.accuracy >= 0.95
    assert 1 <= result.n_units <= 8


def test_every_step_search_on_gender():
    corpus = generate_gender_corpus(0)
    model = _train(corpus)
    config = SearchConfig(mode=MODE_EVERY, direction=DIRECTION_TO_SHE)
    result = run_search(model, *corpus, config)
    assert result.accuracy >= 0.95
    assert result.n_units <= 8


def test_relaxed_estimator_beats_score_function(agreement_model, agreement):
    train, evaluation = agreement
    rows = compare_estimators(agreement_model, train[:SEARCH_TRAIN], evaluation, [0.05], trials=TRIALS)
    by_trial = {(row.trial, row.estimator): row for row in rows}
    wins = 0
    for trial in range(TRIALS):
        relaxed, scored = by_trial[trial, ESTIMATOR_HARD_CONCRETE], by_trial[trial, ESTIMATOR_REINFORCE]
        wins += relaxed.accuracy >= scored.accuracy and relaxed.seconds < scored.seconds
    assert wins >= 2


def test_retention_lowers_the_kl_at_equal_accuracy(agreement_model, agreement):
    train, evaluation = agreement
    train = train[:SEARCH_TRAIN]
    base = SearchConfig(mode=MODE_EVERY)
    kept = 0
    for trial in range(TRIALS):
        seed = run_seed(base.seed, trial)
        with_kl, without_kl = (
            run_search(agreement_model, train, evaluation, replace(base, seed=seed, kl_weight=weight))
            for weight in (1.0, 0.0)
        )
        same_accuracy = abs(with_kl.accuracy - without_kl.accuracy) <= 0.05
        kept += with_kl.mean_kl < without_kl.mean_kl and same_accuracy
    assert kept >= 2


def test_search_is_stable_across_models_and_seeds(agreement):
    study = robustness(*agreement, lm_seeds=[0, 1, 2], repeats=3)
    runs = [result for results in study.results.values() for result in results]
    assert len(runs) == 9
    assert np.std([run.accuracy for run in runs]) <= 0.08
    assert np.std([run.n_units for run in runs]) <= 2.0
