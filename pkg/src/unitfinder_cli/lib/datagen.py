"""
Deterministic generators for the number-agreement and gender-pronoun corpora.

Both generators are pure functions of ``(seed, config)``: every random choice is drawn from one
``numpy.random.Generator`` in a fixed order.
"""

from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from unitfinder_cli.constants import (
    FEMALE,
    MALE,
    PLURAL,
    SINGULAR,
    TASK_AGREEMENT,
    TASK_GENDER,
)
from unitfinder_cli.core.lstm_lm import Vocabulary
from unitfinder_cli.errors import ConfigError, DataError
from unitfinder_cli.lib.corpus import SentenceInstance
from unitfinder_cli.lib.lexicon import PRONOUNS, Lexicon
from unitfinder_cli.utils.logger import logger

__all__ = [
    "AGREEMENT_TEMPLATES",
    "AgreementConfig",
    "GenderConfig",
    "build_vocabulary",
    "counterpart",
    "generate_agreement_corpus",
    "generate_gender_corpus",
    "validate_agreement",
]

# Slots between the subject and the verb, in order
AGREEMENT_TEMPLATES: dict[str, tuple[str, ...]] = {
    "simple": (),
    "adv": ("adverb",),
    "pp": ("preposition", "attractor"),
    "pp_adv": ("preposition", "attractor", "adverb"),
}

_OTHER_NUMBER = {SINGULAR: PLURAL, PLURAL: SINGULAR}
_OTHER_GENDER = {MALE: FEMALE, FEMALE: MALE}
_MAX_ATTEMPTS_PER_SENTENCE = 50


@dataclass(frozen=True)
class AgreementConfig:
    """
    Sizes and sentence shape of the agreement corpus.

    Sentences read ``the SUBJECT [slots] VERB OBJECT``, where the slots are given by
    ``template`` (see :data:`AGREEMENT_TEMPLATES`) and the object is either ``the NOUN`` or a
    proper noun. The attractor is a location noun whose number is drawn independently of the
    subject's.
    """

    n_train: int = 11000
    n_eval: int = 1000
    template: str = "pp"
    lexicon: Lexicon = field(default_factory=Lexicon)

    def __post_init__(self) -> None:
        if self.n_train <= 0 or self.n_eval <= 0:
            raise ConfigError("n_train and n_eval must be positive")
        if self.template not in AGREEMENT_TEMPLATES:
            raise ConfigError(
                f"unknown agreement template {self.template!r}, "
                f"expected one of {', '.join(AGREEMENT_TEMPLATES)}"
            )

    @property
    def slots(self) -> tuple[str, ...]:
        return AGREEMENT_TEMPLATES[self.template]

    def capacity_per_number(self) -> int:
        """How many distinct sentences exist for one subject number"""
        lexicon = self.lexicon
        count = len(lexicon.nouns) * len(lexicon.verbs)
        count *= 2 * len(lexicon.nouns) + len(lexicon.proper_nouns)
        for slot in self.slots:
            if slot == "adverb":
                count *= len(lexicon.adverbs)
            elif slot == "preposition":
                count *= len(lexicon.prepositions)
            elif slot == "attractor":
                count *= 2 * len(lexicon.locations)
        return count


@dataclass(frozen=True)
class GenderConfig:
    """
    Sizes of the gender corpus and the spread of the per-occupation pronoun preference.

    Every occupation gets ``p(he) = 0.5 ± U(bias_low, bias_high)``, the sign drawn at random, and the
    pronoun of each of its sentences is drawn from that preference. ``n_train`` defaults to all
    the instances that are not held out for evaluation.
    """

    n_eval: int = 200
    n_train: Optional[int] = None
    bias_low: float = 0.2
    bias_high: float = 0.4
    lexicon: Lexicon = field(default_factory=Lexicon)

    def __post_init__(self) -> None:
        if self.n_eval <= 0 or (self.n_train is not None and self.n_train <= 0):
            raise ConfigError("n_train and n_eval must be positive")
        if not 0.0 <= self.bias_low <= self.bias_high <= 0.5:
            raise ConfigError("pronoun bias bounds must satisfy 0 <= low <= high <= 0.5")

    @property
    def total(self) -> int:
        return len(self.lexicon.gender_templates) * len(self.lexicon.occupations)


def _choice(rng: np.random.Generator, pool: tuple[str, ...]) -> str:
    return pool[int(rng.integers(len(pool)))]


def _number(rng: np.random.Generator) -> str:
    return SINGULAR if rng.integers(2) == 0 else PLURAL


def _agreement_sentence(
    rng: np.random.Generator, config: AgreementConfig, number: str
) -> SentenceInstance:
    lexicon = config.lexicon
    tokens = ["the", lexicon.noun_form(_choice(rng, lexicon.nouns), number)]
    for slot in config.slots:
        if slot == "adverb":
            tokens.append(_choice(rng, lexicon.adverbs))
        elif slot == "preposition":
            tokens.append(_choice(rng, lexicon.prepositions))
        elif slot == "attractor":
            location = _choice(rng, lexicon.locations)
            tokens += ["the", lexicon.noun_form(location, _number(rng))]

    verb = _choice(rng, lexicon.verbs)
    grammatical = lexicon.verb_form(verb, number)
    tokens.append(grammatical)
    target_position = len(tokens)

    # Objects: a common noun of either number, or a proper noun
    n_common = 2 * len(lexicon.nouns)
    pick = int(rng.integers(n_common + len(lexicon.proper_nouns)))
    if pick < n_common:
        noun = lexicon.nouns[pick // 2]
        tokens += ["the", lexicon.noun_form(noun, SINGULAR if pick % 2 == 0 else PLURAL)]
    else:
        tokens.append(lexicon.proper_nouns[pick - n_common])

    return SentenceInstance(
        tokens=tuple(tokens),
        intervention_position=2,
        target_position=target_position,
        d=grammatical,
        t=lexicon.verb_form(verb, _OTHER_NUMBER[number]),
        task=TASK_AGREEMENT,
        attribute=number,
    )


def _balanced_numbers(rng: np.random.Generator, size: int) -> list[str]:
    numbers = [SINGULAR] * ((size + 1) // 2) + [PLURAL] * (size // 2)
    return [numbers[j] for j in rng.permutation(size)]


def generate_agreement_corpus(
    seed: int, config: Optional[AgreementConfig] = None
) -> tuple[list[SentenceInstance], list[SentenceInstance]]:
    """
    Generate the train and eval splits of the agreement corpus.

    Each split has as many singular as plural subjects (one more singular when its size is odd).
    No sentence occurs twice, in particular no eval sentence occurs in the train split.

    :param seed: Seed of the generator.
    :param config: Sizes and sentence shape; defaults to 11000 train and 1000 eval sentences.
    :return: The ``(train, eval)`` instances.
    :raises DataError: If the pools cannot provide enough distinct sentences.
    """
    config = config or AgreementConfig()
    needed = (config.n_train + 1) // 2 + (config.n_eval + 1) // 2
    capacity = config.capacity_per_number()
    if needed > capacity:
        raise DataError(
            f"the word pools allow {capacity} distinct sentences per subject number with the "
            f"{config.template!r} template, {needed} are needed"
        )

    rng = np.random.default_rng(seed)
    seen: set[tuple[str, ...]] = set()
    splits: list[list[SentenceInstance]] = []
    for size in (config.n_train, config.n_eval):
        split = []
        for number in _balanced_numbers(rng, size):
            for _ in range(_MAX_ATTEMPTS_PER_SENTENCE):
                instance = _agreement_sentence(rng, config, number)
                if instance.tokens not in seen:
                    break
            else:
                raise DataError(
                    f"could not draw a new {number} sentence after "
                    f"{_MAX_ATTEMPTS_PER_SENTENCE} attempts; enlarge the word pools"
                )
            seen.add(instance.tokens)
            split.append(instance)
        splits.append(split)

    logger.debug(f"Agreement corpus: {len(splits[0])} train, {len(splits[1])} eval sentences")
    return splits[0], splits[1]


def _template_positions(template: str) -> tuple[list[str], int, int]:
    words = template.split()
    if "{pronoun}" not in words:
        raise DataError(f"gender template has no pronoun slot: {template!r}")
    if "{occupation}" not in words:
        raise DataError(f"gender template has no occupation slot: {template!r}")
    occupation_position = words.index("{occupation}") + 1
    pronoun_position = words.index("{pronoun}") + 1
    if occupation_position >= pronoun_position:
        raise DataError(f"the occupation must precede the pronoun: {template!r}")
    return words, occupation_position, pronoun_position


def generate_gender_corpus(
    seed: int, config: Optional[GenderConfig] = None
) -> tuple[list[SentenceInstance], list[SentenceInstance]]:
    """
    Generate the train and eval splits of the gender corpus.

    Every template is filled with every occupation (17 × 169 = 2873 instances with the default
    lexicon); the instances are shuffled and the first ``n_eval`` become the eval split.

    :raises DataError: If a template lacks the pronoun or occupation slot, or the requested sizes
        exceed the number of instances.
    """
    config = config or GenderConfig()
    lexicon = config.lexicon
    parsed = [_template_positions(template) for template in lexicon.gender_templates]
    n_train = config.total - config.n_eval if config.n_train is None else config.n_train
    if n_train <= 0 or n_train + config.n_eval > config.total:
        raise DataError(
            f"{config.total} gender instances cannot provide {n_train} train and "
            f"{config.n_eval} eval instances"
        )

    rng = np.random.default_rng(seed)
    spread = rng.uniform(config.bias_low, config.bias_high, size=len(lexicon.occupations))
    signs = np.where(rng.integers(2, size=len(lexicon.occupations)) == 0, 1.0, -1.0)
    p_he = 0.5 + signs * spread

    instances = []
    for words, occupation_position, pronoun_position in parsed:
        for occupation, p in zip(lexicon.occupations, p_he):
            gender = MALE if rng.random() < p else FEMALE
            pronoun = PRONOUNS[gender]
            tokens = tuple(
                occupation if w == "{occupation}" else pronoun if w == "{pronoun}" else w
                for w in words
            )
            instances.append(
                SentenceInstance(
                    tokens=tokens,
                    intervention_position=occupation_position,
                    target_position=pronoun_position,
                    d=pronoun,
                    t=PRONOUNS[_OTHER_GENDER[gender]],
                    task=TASK_GENDER,
                    attribute=gender,
                )
            )

    order = rng.permutation(len(instances))
    eval_split = [instances[j] for j in order[: config.n_eval]]
    train_split = [instances[j] for j in order[config.n_eval : config.n_eval + n_train]]
    logger.debug(f"Gender corpus: {len(train_split)} train, {len(eval_split)} eval sentences")
    return train_split, eval_split


def counterpart(instance: SentenceInstance, lexicon: Optional[Lexicon] = None) -> SentenceInstance:
    """
    The minimal pair of an instance: the subject number (or the pronoun gender) is flipped and the
    target re-inflected, so the two sentences differ at positions ``i`` and ``n`` only (``n`` only
    for the gender task).

    :raises DataError: If the tokens at ``i`` and ``n`` are not inflected lexicon entries.
    """
    lexicon = lexicon or Lexicon()
    tokens = list(instance.tokens)
    if instance.task == TASK_GENDER:
        attribute = _OTHER_GENDER.get(instance.attribute)
        if attribute is None:
            raise DataError(f"unknown gender attribute {instance.attribute!r}")
        tokens[instance.target_position - 1] = PRONOUNS[attribute]
    else:
        subject = lexicon.noun_number(tokens[instance.intervention_position - 1])
        verb = lexicon.verb_number(tokens[instance.target_position - 1])
        if subject is None or verb is None:
            raise DataError(f"not an agreement instance: {instance.text!r}")
        attribute = _OTHER_NUMBER[subject[1]]
        tokens[instance.intervention_position - 1] = lexicon.noun_form(subject[0], attribute)
        tokens[instance.target_position - 1] = lexicon.verb_form(verb[0], attribute)
    return replace(instance, tokens=tuple(tokens), d=instance.t, t=instance.d, attribute=attribute)


def validate_agreement(instance: SentenceInstance, lexicon: Optional[Lexicon] = None) -> bool:
    """
    Rule-based check of an agreement instance.

    The sentence must contain exactly one verb, at the target position; the subject at the
    intervention position must have the annotated number; ``d`` must be the verb form agreeing with
    it and ``t`` the other form.
    """
    lexicon = lexicon or Lexicon()
    if instance.task != TASK_AGREEMENT:
        return False
    verbs = [j for j, token in enumerate(instance.tokens, start=1) if lexicon.verb_number(token)]
    if verbs != [instance.target_position]:
        return False
    subject = lexicon.noun_number(instance.tokens[instance.intervention_position - 1])
    verb = lexicon.verb_number(instance.tokens[instance.target_position - 1])
    if subject is None or verb is None:
        return False
    lemma, number = verb
    return (
        subject[1] == instance.attribute
        and number == subject[1]
        and instance.d == lexicon.verb_form(lemma, number)
        and instance.t == lexicon.verb_form(lemma, _OTHER_NUMBER[number])
    )


def build_vocabulary(instances: Iterable[SentenceInstance]) -> Vocabulary:
    """A vocabulary holding every token and every contrast form of ``instances``"""
    tokens: set[str] = set()
    for instance in instances:
        tokens.update(instance.tokens)
        tokens.update((instance.d, instance.t))
    return Vocabulary.from_tokens(sorted(tokens))
