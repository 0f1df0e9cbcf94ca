import os

import hypothesis
import numpy as np
import pytest

from unitfinder_cli.core.lstm_lm import LanguageModel, LMConfig, LMParameters
from unitfinder_cli.lib.corpus import SentenceInstance
from unitfinder_cli.lib.datagen import AgreementConfig, build_vocabulary, generate_agreement_corpus

np.seterr(all="warn")

hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "fast"))


@pytest.fixture(scope="session")
def agreement_corpus() -> tuple[list[SentenceInstance], list[SentenceInstance]]:
    return generate_agreement_corpus(0, AgreementConfig(n_train=24, n_eval=12))


@pytest.fixture(scope="session")
def tiny_model(agreement_corpus) -> LanguageModel:
    """An untrained two-layer model with large enough weights to make interventions visible"""
    train, evaluation = agreement_corpus
    vocabulary = build_vocabulary([*train, *evaluation])
    config = LMConfig(vocab_size=len(vocabulary), num_layers=2, hidden_size=8, embedding_size=6)
    params = LMParameters.initialize(config, np.random.default_rng(7), scale=0.5)
    return LanguageModel(config, params, vocabulary)


@pytest.fixture()
def instance(agreement_corpus) -> SentenceInstance:
    return agreement_corpus[1][0]
