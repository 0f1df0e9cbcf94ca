"""
Substitution of hidden-unit activations with baseline values::

    ĥ = (1 - m) ⊙ h + m ⊙ b

applied to the concatenated hidden vector of the LM (k units, both layers) either at the
intervention position only (``single``) or at every step before the target (``every``). The
altered vector feeds both the output projection and the recurrence; cell vectors are never
touched.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from unitfinder_cli.constants import MODE_EVERY, MODE_SINGLE, TRACE_COLUMNS
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core.autodiff import Node, RealArray
from unitfinder_cli.core.hard_concrete import HardConcreteParams
from unitfinder_cli.core.lstm_lm import IdArray, LanguageModel, pad_batch
from unitfinder_cli.errors import ConfigError, DataError, ShapeMismatchError
from unitfinder_cli.utils import write_tsv

__all__ = [
    "InterventionBatch",
    "InterventionDataset",
    "InterventionParams",
    "InterventionTrace",
    "apply_mask",
    "forward_with_intervention",
    "intervened_logits",
    "target_logits",
    "trace_rows",
    "write_trace",
]


def apply_mask(h: Any, m: Any, b: Any) -> Any:
    """
    Replace the units selected by ``m`` with the baseline ``b``.

    Entries where ``m = 0`` keep ``h`` exactly, entries where ``m = 1`` take ``b`` exactly.

    :raises ShapeMismatchError: If the three vectors do not have the same length.
    """
    lengths = [(v.shape if isinstance(v, Node) else np.shape(v))[-1:] for v in (h, m, b)]
    if lengths[1] != lengths[0] or lengths[2] != lengths[0]:
        raise ShapeMismatchError("apply_mask", lengths[0], (lengths[1], lengths[2]))
    return (1.0 - m) * h + m * b


@dataclass(frozen=True)
class InterventionParams:
    """
    What to intervene with: a mask (Hard Concrete parameters while searching, a frozen binary
    vector afterwards), the baseline and the mode.

    Baseline values are clipped to ``[-1, 1]``, the range of the LSTM hidden units.
    """

    mask: Union[HardConcreteParams, RealArray]
    baseline: RealArray
    mode: str = MODE_SINGLE

    def __post_init__(self) -> None:
        if self.mode not in (MODE_SINGLE, MODE_EVERY):
            raise ConfigError(f"unknown intervention mode {self.mode!r}")
        units = self.mask.units if isinstance(self.mask, HardConcreteParams) else len(self.mask)
        if np.shape(self.baseline) != (units,):
            raise ShapeMismatchError("baseline", (units,), np.shape(self.baseline))
        object.__setattr__(self, "baseline", np.clip(np.asarray(self.baseline, dtype=np.float64), -1.0, 1.0))


def _selected(mode: str, step: int, i: int, n: int) -> bool:
    """Whether 0-based ``step`` (which consumes ``x_{step+1}``) is altered"""
    return step == i - 1 if mode == MODE_SINGLE else step < n - 1


@dataclass(frozen=True)
class InterventionTrace:
    """
    Per step of the prefix ``x_1 ... x_{n-1}``: the hidden vector of the uninstrumented run, the
    vector used by the intervened run, and both next-token distributions.
    """

    tokens: tuple[str, ...]
    original: RealArray
    altered: RealArray
    original_distributions: RealArray
    distributions: RealArray

    def __len__(self) -> int:
        return len(self.tokens)


def forward_with_intervention(
    model: LanguageModel,
    params: InterventionParams,
    instance: Any,
    mask: Optional[RealArray] = None,
) -> tuple[RealArray, InterventionTrace]:
    """
    Run the prefix of ``instance`` with the intervention and return the distribution over ``x_n``.

    :param mask: The mask values to use, e.g. one Hard Concrete sample; defaults to
        ``params.mask`` when that is a frozen vector.
    :raises DataError: If ``i >= n``.
    """
    i, n = instance.intervention_position, instance.target_position
    if not 1 <= i < n:
        raise DataError(f"intervention position {i} must precede target position {n}")
    if mask is None:
        if isinstance(params.mask, HardConcreteParams):
            raise ConfigError("pass a mask sample when the mask is still a distribution")
        mask = params.mask
    mask = np.asarray(mask, dtype=np.float64)
    baseline = params.baseline

    ids = np.array([model.vocabulary.encode(instance.prefix)], dtype=np.int64)
    original_hidden: list[RealArray] = []
    altered_hidden: list[RealArray] = []

    def record(step: int, hidden: RealArray) -> RealArray:
        original_hidden.append(hidden[0])
        return hidden

    def alter(step: int, hidden: RealArray) -> RealArray:
        if _selected(params.mode, step, i, n):
            hidden = apply_mask(hidden, mask, baseline)
        altered_hidden.append(hidden[0])
        return hidden

    original_logits = model.run(ids, hook=record)
    logits = model.run(ids, hook=alter)
    distributions = np.stack([ad.softmax(step_logits)[0] for step_logits in logits])
    trace = InterventionTrace(
        tokens=tuple(instance.prefix),
        original=np.stack(original_hidden),
        altered=np.stack(altered_hidden),
        original_distributions=np.stack([ad.softmax(step_logits)[0] for step_logits in original_logits]),
        distributions=distributions,
    )
    return distributions[-1], trace


@dataclass(frozen=True)
class InterventionBatch:
    """
    Padded inputs of several instances, ready for a batched intervened run.

    ``selectors[t]`` and ``last[t]`` are ``(B, 1)`` columns: whether step ``t`` is altered, and
    whether it is the row's final prefix step (the one predicting ``x_n``). ``steps`` marks the
    real prefix steps of every row, ``(B, T)``.
    """

    ids: IdArray
    selectors: RealArray
    last: RealArray
    steps: RealArray
    d_ids: IdArray
    t_ids: IdArray
    original_distributions: RealArray

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def width(self) -> int:
        return int(self.ids.shape[1])


@dataclass(frozen=True)
class InterventionDataset:
    """
    Encoded instances and the uninstrumented model's per-step distributions, computed once so
    that batches can be cut without re-running the original model.
    """

    instances: tuple[Any, ...]
    prefixes: tuple[tuple[int, ...], ...]
    original_distributions: tuple[RealArray, ...]
    mode: str

    @classmethod
    def build(cls, model: LanguageModel, instances: Sequence[Any], mode: str, batch_size: int = 256) -> "InterventionDataset":
        """
        :raises DataError: If a token is outside the model's vocabulary.
        """
        if mode not in (MODE_SINGLE, MODE_EVERY):
            raise ConfigError(f"unknown intervention mode {mode!r}")
        prefixes = tuple(tuple(model.vocabulary.encode(instance.prefix)) for instance in instances)
        for instance in instances:
            model.vocabulary.encode((instance.d, instance.t))
        distributions: list[RealArray] = []
        for start in range(0, len(prefixes), batch_size):
            chunk = prefixes[start : start + batch_size]
            ids, _ = pad_batch(chunk)
            steps = [ad.softmax(logits) for logits in model.run(ids)]
            distributions.extend(
                np.stack([steps[t][row] for t in range(len(prefix))]) for row, prefix in enumerate(chunk)
            )
        return cls(tuple(instances), prefixes, tuple(distributions), mode)

    def __len__(self) -> int:
        return len(self.instances)

    def batch(self, model: LanguageModel, indices: Sequence[int]) -> InterventionBatch:
        ids, steps = pad_batch([self.prefixes[j] for j in indices])
        rows, width = ids.shape
        selectors = np.zeros((width, rows, 1))
        last = np.zeros((width, rows, 1))
        original = np.zeros((width, rows, model.config.vocab_size))
        for row, j in enumerate(indices):
            instance = self.instances[j]
            length = len(self.prefixes[j])
            last[length - 1, row, 0] = 1.0
            original[:length, row] = self.original_distributions[j]
            for step in range(length):
                if _selected(self.mode, step, instance.intervention_position, instance.target_position):
                    selectors[step, row, 0] = 1.0
        vocabulary = model.vocabulary
        return InterventionBatch(
            ids=ids,
            selectors=selectors,
            last=last,
            steps=steps,
            d_ids=np.array([vocabulary.id(self.instances[j].d) for j in indices], dtype=np.int64),
            t_ids=np.array([vocabulary.id(self.instances[j].t) for j in indices], dtype=np.int64),
            original_distributions=original,
        )


def intervened_logits(model: LanguageModel, batch: InterventionBatch, mask: Any, baseline: Any) -> list[Any]:
    """
    The per-step logits of a batched intervened run.

    :param mask: ``(k,)`` shared by every row, or ``(B, k)`` with one mask per row; arrays or
        traced nodes.
    :param baseline: ``(k,)`` values in ``[-1, 1]``.
    """

    def hook(step: int, hidden: Any) -> Any:
        if not batch.selectors[step].any():
            return hidden
        return apply_mask(hidden, batch.selectors[step] * mask, baseline)

    return model.run(batch.ids, hook=hook)


def target_logits(batch: InterventionBatch, logits: Sequence[Any]) -> Any:
    """Each row's logits at its final prefix step, ``(B, V)``"""
    total: Any = None
    for step, step_logits in enumerate(logits):
        if not batch.last[step].any():
            continue
        term = step_logits * batch.last[step]
        total = term if total is None else total + term
    return total


def trace_rows(trace: InterventionTrace, units: Sequence[int], d_id: int, t_id: int) -> list[dict[str, Any]]:
    """
    One row per (step, unit) in step order: the original and altered activation of the unit and
    the probabilities of ``d`` and ``t`` after that step, without and with the intervention.
    """
    rows = []
    for step, token in enumerate(trace.tokens):
        for unit in units:
            rows.append(
                {
                    "step": step + 1,
                    "token": token,
                    "unit": int(unit),
                    "original": float(trace.original[step, unit]),
                    "altered": float(trace.altered[step, unit]),
                    "p_d_original": float(trace.original_distributions[step, d_id]),
                    "p_t_original": float(trace.original_distributions[step, t_id]),
                    "p_d_altered": float(trace.distributions[step, d_id]),
                    "p_t_altered": float(trace.distributions[step, t_id]),
                }
            )
    return rows


def write_trace(path: Path, rows: Sequence[dict[str, Any]]) -> Path:
    """Write trace rows as a tab-separated file with a header line"""
    return write_tsv(path, rows, TRACE_COLUMNS)
