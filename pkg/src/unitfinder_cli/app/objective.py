"""
The terms of the search objective and the assignment of contrast pairs.

All functions are written with the functional primitives, so they evaluate eagerly on arrays
and record on traced nodes alike.
"""

from collections.abc import Sequence
from typing import Any

import numpy as np

from unitfinder_cli.constants import DIRECTION_ANY, DIRECTIONS, FEMALE, MALE, PLURAL, PROBABILITY_FLOOR, SINGULAR
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core.autodiff import RealArray
from unitfinder_cli.core.intervention import InterventionBatch, target_logits
from unitfinder_cli.core.lstm_lm import LanguageModel, target_distributions
from unitfinder_cli.errors import ConfigError, DataError
from unitfinder_cli.lib.corpus import SentenceInstance

__all__ = [
    "assign_contrast",
    "assign_contrasts",
    "batch_kl",
    "batch_ratios",
    "kl_retention_loss",
    "ratio_loss",
    "select_direction",
    "target_attribute",
]

_OTHER = {SINGULAR: PLURAL, PLURAL: SINGULAR, MALE: FEMALE, FEMALE: MALE}


def ratio_loss(distribution: Any, d: Any, t: Any) -> Any:
    """
    ``p(d) / p(t)``, both probabilities raised by :data:`PROBABILITY_FLOOR`.

    Below 1 exactly when ``t`` has become more likely than ``d``. ``distribution`` may be one
    distribution with integer ``d``/``t``, or a ``(B, V)`` matrix with id vectors.
    """
    if np.ndim(d) == 0:
        p_d = ad.sum_(ad.slice_(distribution, int(d), int(d) + 1))
        p_t = ad.sum_(ad.slice_(distribution, int(t), int(t) + 1))
    else:
        p_d, p_t = ad.pick(distribution, d), ad.pick(distribution, t)
    return (p_d + PROBABILITY_FLOOR) / (p_t + PROBABILITY_FLOOR)


def kl_retention_loss(original: Any, intervened: Any, weights: Any = None) -> Any:
    """
    Mean over steps of ``KL(original ‖ intervened)``.

    :param original: ``(T, V)`` reference distributions.
    :param intervened: ``(T, V)`` distributions of the intervened run.
    :param weights: Optional ``(T,)`` 0/1 step mask; the mean runs over the marked steps.
    """
    original = np.asarray(original, dtype=np.float64)
    reference = np.log(original + PROBABILITY_FLOOR)
    per_step = ad.sum_(original * (reference - ad.log(intervened + PROBABILITY_FLOOR)), axis=-1)
    if weights is None:
        return ad.mean(per_step)
    weights = np.asarray(weights, dtype=np.float64)
    return ad.sum_(per_step * weights) / float(weights.sum())


def batch_ratios(batch: InterventionBatch, logits: Sequence[Any]) -> Any:
    """``(B,)`` ratios at every row's target position"""
    probabilities = ad.softmax(target_logits(batch, logits))
    return ratio_loss(probabilities, batch.d_ids, batch.t_ids)


def _contrast_free(batch: InterventionBatch, step: int, vocab_size: int) -> RealArray:
    """``(B, V)`` 0/1 mask dropping ``d`` and ``t`` on the rows whose final prefix step is ``step``"""
    keep = np.ones((len(batch), vocab_size))
    rows = np.flatnonzero(batch.last[step][:, 0])
    keep[rows, batch.d_ids[rows]] = 0.0
    keep[rows, batch.t_ids[rows]] = 0.0
    return keep


def batch_kl(batch: InterventionBatch, logits: Sequence[Any], reduce: bool = True) -> Any:
    """
    Retention loss of a batch: per row, the mean KL over its real prefix steps; then the mean
    over rows, or the ``(B,)`` per-row values when ``reduce`` is off.

    At the final prefix step the contrast pair is left out and both distributions are renormalized
    over the remaining tokens, so the flip itself costs nothing.
    """
    counts = batch.steps.sum(axis=1)
    total: Any = 0.0
    for step, step_logits in enumerate(logits):
        weights = batch.steps[:, step] / counts
        if not weights.any():
            continue
        original = batch.original_distributions[step]
        keep = _contrast_free(batch, step, original.shape[-1])
        original = original * keep
        original = original / (original.sum(axis=-1, keepdims=True) + PROBABILITY_FLOOR)
        reference = np.log(original + PROBABILITY_FLOOR)
        intervened = ad.softmax(step_logits) * keep
        intervened = intervened / (ad.sum_(intervened, axis=-1, keepdims=True) + PROBABILITY_FLOOR)
        per_row = ad.sum_(original * (reference - ad.log(intervened + PROBABILITY_FLOOR)), axis=-1)
        total = total + per_row * weights
    return ad.mean(total) if reduce else total


def assign_contrasts(model: LanguageModel, instances: Sequence[SentenceInstance]) -> list[SentenceInstance]:
    """
    Order every contrast pair by the model's preference: ``d`` becomes the form the
    uninstrumented model finds more likely at ``x_n`` and ``t`` the other. On an exact tie the form
    with the lower token id becomes ``d``.
    """
    if not instances:
        return []
    distributions = target_distributions(model, [instance.prefix for instance in instances])
    assigned = []
    for instance, distribution in zip(instances, distributions):
        d_id, t_id = model.vocabulary.id(instance.d), model.vocabulary.id(instance.t)
        p_d, p_t = distribution[d_id], distribution[t_id]
        keep = p_d > p_t or (p_d == p_t and d_id < t_id)
        assigned.append(instance if keep else instance.swapped())
    return assigned


def assign_contrast(instance: SentenceInstance, model: LanguageModel) -> SentenceInstance:
    """The instance with ``(d, t)`` ordered by the model's preference (see :func:`assign_contrasts`)"""
    return assign_contrasts(model, [instance])[0]


def target_attribute(generated: SentenceInstance, token: str) -> str:
    """
    The number (or gender) expressed by ``token``, one of the two forms of ``generated``'s pair.

    At generation time ``d`` carries the instance attribute, so the other form carries the
    opposite one.
    """
    if token == generated.d:
        return generated.attribute
    if token == generated.t:
        return _OTHER[generated.attribute]
    raise DataError(f"{token!r} is not a form of the contrast pair of {generated.text!r}")


def select_direction(
    generated: Sequence[SentenceInstance], assigned: Sequence[SentenceInstance], direction: str
) -> list[SentenceInstance]:
    """
    The assigned instances whose target form ``t`` expresses the direction's attribute.

    ``any`` keeps every instance; a direction of the other task keeps none.
    """
    if direction == DIRECTION_ANY:
        return list(assigned)
    if direction not in DIRECTIONS:
        raise ConfigError(f"unknown direction {direction!r}")
    task, attribute = DIRECTIONS[direction]
    return [
        a
        for g, a in zip(generated, assigned)
        if a.task == task and target_attribute(g, a.t) == attribute
    ]
