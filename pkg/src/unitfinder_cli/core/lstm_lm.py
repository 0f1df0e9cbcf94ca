"""
A two-layer LSTM language model written with the functional primitives of
:mod:`unitfinder_cli.core.autodiff`.

The same step function runs eagerly on arrays (inference, evaluation) and on traced nodes
(training, intervention search). There is no beginning-of-sentence token: the state starts at
zeros and the first input is ``x_1``. ``<eos>`` is the last prediction target of every training
sentence and the padding id of batches.

Parameters are kept in a flat name -> array mapping:

* ``embedding``: ``(V, E)``
* ``layer{l}.weight_ih``: ``(E or H, 4H)``, ``layer{l}.weight_hh``: ``(H, 4H)``,
  ``layer{l}.bias``: ``(4H,)``, gate blocks in the order input, forget, cell, output
* ``output.weight``: ``(H, V)``, ``output.bias``: ``(V,)``
"""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields
from typing import Any, Callable, Optional

import numpy as np
import numpy.typing as npt

from unitfinder_cli.constants import EOS_ID, EOS_TOKEN, UNK_ID, UNK_TOKEN
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core.autodiff import RealArray
from unitfinder_cli.core.optim import SGD
from unitfinder_cli.errors import ConfigError, DataError, NumericalError, ShapeMismatchError
from unitfinder_cli.utils.logger import logger
from unitfinder_cli.utils.timer import Timer

IdArray = npt.NDArray[np.int64]
# hook(step, hidden) -> replacement, hidden being the (batch, k) concatenation of the layers
StepHook = Callable[[int, Any], Any]

__all__ = [
    "LMConfig",
    "LMParameters",
    "LMState",
    "LanguageModel",
    "TrainingConfig",
    "TrainingResult",
    "Vocabulary",
    "agreement_accuracy",
    "forward_step",
    "pad_batch",
    "perplexity",
    "target_distributions",
    "train_lm",
]


@dataclass(frozen=True)
class Vocabulary:
    """Token strings and their dense ids. ``<unk>`` is id 0, ``<eos>`` id 1."""

    tokens: tuple[str, ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens[:2] != (UNK_TOKEN, EOS_TOKEN):
            raise DataError(f"vocabulary must start with {UNK_TOKEN} and {EOS_TOKEN}")
        index = {token: i for i, token in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise DataError("vocabulary tokens must be unique")
        object.__setattr__(self, "index", index)

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> "Vocabulary":
        """Reserved tokens first, then ``tokens`` in the given order without duplicates"""
        ordered = dict.fromkeys((UNK_TOKEN, EOS_TOKEN, *tokens))
        return cls(tuple(ordered))

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        """
        :raises DataError: If the token is not in the vocabulary.
        """
        try:
            return self.index[token]
        except KeyError as e:
            raise DataError(f"token {token!r} is not in the vocabulary") from e

    def encode(self, tokens: Iterable[str], allow_unknown: bool = False) -> list[int]:
        if allow_unknown:
            return [self.index.get(token, UNK_ID) for token in tokens]
        return [self.id(token) for token in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]


@dataclass(frozen=True)
class LMConfig:
    """Sizes of the language model. ``k = num_layers * hidden_size`` units can be intervened on."""

    vocab_size: int
    num_layers: int = 2
    hidden_size: int = 64
    embedding_size: int = 64
    tied_output: bool = False

    def __post_init__(self) -> None:
        if self.num_layers < 1:
            raise ConfigError("num_layers must be at least 1")
        if self.hidden_size < 8:
            raise ConfigError("hidden_size must be at least 8")
        if self.embedding_size < 1:
            raise ConfigError("embedding_size must be positive")
        if self.vocab_size < 3:
            raise ConfigError("vocab_size must cover the reserved tokens and one word")
        if self.tied_output:
            raise ConfigError("tied output embeddings are not supported")

    @property
    def units(self) -> int:
        return self.num_layers * self.hidden_size

    def shapes(self) -> dict[str, tuple[int, ...]]:
        """The expected shape of every named parameter"""
        h = self.hidden_size
        shapes: dict[str, tuple[int, ...]] = {"embedding": (self.vocab_size, self.embedding_size)}
        for layer in range(self.num_layers):
            inputs = self.embedding_size if layer == 0 else h
            shapes[f"layer{layer}.weight_ih"] = (inputs, 4 * h)
            shapes[f"layer{layer}.weight_hh"] = (h, 4 * h)
            shapes[f"layer{layer}.bias"] = (4 * h,)
        shapes["output.weight"] = (h, self.vocab_size)
        shapes["output.bias"] = (self.vocab_size,)
        return shapes

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class LMParameters:
    """The named weight arrays of a model, validated against its config."""

    arrays: Mapping[str, RealArray]

    @classmethod
    def initialize(cls, config: LMConfig, rng: np.random.Generator, scale: float = 0.1) -> "LMParameters":
        """Uniform in ``[-scale, scale]``, drawn in the order of :meth:`LMConfig.shapes`"""
        return cls(
            {name: rng.uniform(-scale, scale, size=shape) for name, shape in config.shapes().items()}
        )

    @classmethod
    def zeros(cls, config: LMConfig) -> "LMParameters":
        return cls({name: np.zeros(shape) for name, shape in config.shapes().items()})

    def validate(self, config: LMConfig) -> "LMParameters":
        """
        :raises ShapeMismatchError: If an array is missing or has the wrong shape.
        :raises NumericalError: If a value is not finite.
        """
        for name, shape in config.shapes().items():
            if name not in self.arrays:
                raise ShapeMismatchError(f"parameter {name!r}", shape, None)
            if self.arrays[name].shape != shape:
                raise ShapeMismatchError(f"parameter {name!r}", shape, self.arrays[name].shape)
            if not np.all(np.isfinite(self.arrays[name])):
                raise NumericalError(f"parameter {name!r} holds non-finite values")
        extra = set(self.arrays) - set(config.shapes())
        if extra:
            raise ShapeMismatchError("parameters", sorted(config.shapes()), sorted(self.arrays))
        return self

    def __getitem__(self, name: str) -> RealArray:
        return self.arrays[name]


@dataclass(frozen=True)
class LMState:
    """Per-layer hidden and cell vectors. Arrays are ``(H,)`` for one sentence, ``(B, H)`` batched."""

    h: tuple[Any, ...]
    c: tuple[Any, ...]

    @classmethod
    def zeros(cls, config: LMConfig, batch: Optional[int] = None) -> "LMState":
        shape = (config.hidden_size,) if batch is None else (batch, config.hidden_size)
        layers = range(config.num_layers)
        return cls(tuple(np.zeros(shape) for _ in layers), tuple(np.zeros(shape) for _ in layers))

    @property
    def hidden(self) -> Any:
        """The concatenated hidden vector of all layers (length k)"""
        return ad.concat(self.h, axis=-1)


def _lstm_cell(params: Mapping[str, Any], layer: int, x: Any, h: Any, c: Any, size: int) -> tuple[Any, Any]:
    z = ad.matmul(x, params[f"layer{layer}.weight_ih"])
    z = z + ad.matmul(h, params[f"layer{layer}.weight_hh"]) + params[f"layer{layer}.bias"]
    i = ad.sigmoid(ad.slice_(z, 0, size))
    f = ad.sigmoid(ad.slice_(z, size, 2 * size))
    g = ad.tanh(ad.slice_(z, 2 * size, 3 * size))
    o = ad.sigmoid(ad.slice_(z, 3 * size, 4 * size))
    c_new = f * c + i * g
    return o * ad.tanh(c_new), c_new


def _step(
    config: LMConfig,
    params: Mapping[str, Any],
    state: LMState,
    ids: IdArray,
    hook: Optional[Callable[[Any], Any]] = None,
) -> tuple[LMState, Any]:
    """One batched step: embed ``ids`` ``(B,)``, update every layer, project the top layer."""
    size = config.hidden_size
    x = ad.embedding(params["embedding"], ids)
    hs, cs = [], []
    for layer in range(config.num_layers):
        x, c = _lstm_cell(params, layer, x, state.h[layer], state.c[layer], size)
        hs.append(x)
        cs.append(c)
    if hook is not None:
        replaced = hook(ad.concat(hs, axis=-1))
        hs = [ad.slice_(replaced, layer * size, (layer + 1) * size) for layer in range(config.num_layers)]
    logits = ad.matmul(hs[-1], params["output.weight"]) + params["output.bias"]
    return LMState(tuple(hs), tuple(cs)), logits


def forward_step(
    config: LMConfig,
    params: LMParameters,
    state: LMState,
    token_id: int,
    hook: Optional[Callable[[RealArray], RealArray]] = None,
) -> tuple[LMState, RealArray]:
    """
    Consume one token and return the new state and the next-token distribution.

    :param state: An unbatched state (vectors of length ``hidden_size``).
    :param hook: Receives the concatenated hidden vector (length k) after the recurrent update;
        its return value replaces it for the output projection and for the next step.
    :raises DataError: If ``token_id`` is outside the vocabulary.
    """
    if not 0 <= token_id < config.vocab_size:
        raise DataError(f"token id {token_id} outside [0, {config.vocab_size})")
    batched = LMState(tuple(h[None, :] for h in state.h), tuple(c[None, :] for c in state.c))
    batch_hook = None if hook is None else (lambda hidden: np.asarray(hook(hidden[0]))[None, :])
    new_state, logits = _step(config, params.arrays, batched, np.array([token_id]), batch_hook)
    distribution = ad.softmax(logits)[0]
    return LMState(tuple(h[0] for h in new_state.h), tuple(c[0] for c in new_state.c)), distribution


def pad_batch(sequences: Sequence[Sequence[int]], pad_id: int = EOS_ID) -> tuple[IdArray, RealArray]:
    """
    Right-pad id sequences into a ``(B, T)`` matrix.

    :return: The ids and a float mask with 1 at real positions.
    """
    width = max((len(s) for s in sequences), default=0)
    ids = np.full((len(sequences), width), pad_id, dtype=np.int64)
    mask = np.zeros((len(sequences), width))
    for row, sequence in enumerate(sequences):
        ids[row, : len(sequence)] = sequence
        mask[row, : len(sequence)] = 1.0
    return ids, mask


@dataclass(frozen=True)
class LanguageModel:
    """A trained model: its config, parameters and vocabulary."""

    config: LMConfig
    params: LMParameters
    vocabulary: Vocabulary

    def __post_init__(self) -> None:
        if len(self.vocabulary) != self.config.vocab_size:
            raise ShapeMismatchError("vocabulary", self.config.vocab_size, len(self.vocabulary))
        self.params.validate(self.config)

    @property
    def units(self) -> int:
        return self.config.units

    def run(
        self,
        ids: IdArray,
        hook: Optional[StepHook] = None,
        params: Optional[Mapping[str, Any]] = None,
    ) -> list[Any]:
        """
        Feed a ``(B, T)`` id matrix and return the ``T`` logit matrices ``(B, V)``.

        :param hook: Called as ``hook(step, hidden)`` at every step (0-based).
        :param params: Traced parameter nodes to use instead of the stored arrays.
        """
        params = self.params.arrays if params is None else params
        state = LMState.zeros(self.config, batch=ids.shape[0])
        outputs = []
        for step in range(ids.shape[1]):
            step_hook = None if hook is None else (lambda hidden, s=step: hook(s, hidden))
            state, logits = _step(self.config, params, state, ids[:, step], step_hook)
            outputs.append(logits)
        return outputs

    def distributions(self, tokens: Sequence[str]) -> RealArray:
        """The next-token distributions after each of ``tokens``, shape ``(len(tokens), V)``"""
        ids = np.array([self.vocabulary.encode(tokens)], dtype=np.int64)
        return np.stack([ad.softmax(logits)[0] for logits in self.run(ids)])


@dataclass(frozen=True)
class TrainingConfig:
    """Plain SGD over shuffled mini-batches with gradient-norm clipping."""

    learning_rate: float = 1.0
    epochs: int = 30
    batch_size: int = 32
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.clip_norm < 0:
            raise ConfigError("clip_norm must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class TrainingResult:
    model: LanguageModel
    losses: tuple[float, ...]
    seconds: float = 0.0


def _sequence_loss(model: LanguageModel, ids: IdArray, mask: RealArray, params: Mapping[str, Any]) -> Any:
    """Mean cross-entropy (nats per real token) of predicting ``ids[:, t + 1]`` after ``ids[:, t]``"""
    inputs, targets, weights = ids[:, :-1], ids[:, 1:], mask[:, 1:]
    total: Any = 0.0
    for step, logits in enumerate(model.run(inputs, params=params)):
        picked = ad.pick(ad.log_softmax(logits), targets[:, step])
        total = total - ad.sum_(picked * weights[:, step])
    return total / float(weights.sum())


def train_lm(
    config: LMConfig,
    vocabulary: Vocabulary,
    sentences: Sequence[Sequence[str]],
    training: Optional[TrainingConfig] = None,
    params: Optional[LMParameters] = None,
) -> TrainingResult:
    """
    Train a model on whole sentences, each followed by ``<eos>``.

    :param sentences: Token sequences; the first token is an input only, every following token and
        the final ``<eos>`` are prediction targets.
    :param params: Starting parameters; drawn from the training seed when omitted.
    :return: The trained model and the mean training cross-entropy of every epoch.
    :raises DataError: If the corpus is empty or holds out-of-vocabulary tokens.
    :raises NumericalError: If a batch loss stops being finite.
    """
    training = training or TrainingConfig()
    if not sentences:
        raise DataError("cannot train on an empty corpus")
    encoded = [vocabulary.encode(tokens) + [EOS_ID] for tokens in sentences]
    rng = np.random.default_rng(training.seed)
    params = params or LMParameters.initialize(config, rng)
    model = LanguageModel(config, params, vocabulary)
    optimizer = SGD(training.learning_rate, clip_norm=training.clip_norm)
    arrays = dict(model.params.arrays)

    losses: list[float] = []
    last_finite = float("nan")
    timer = Timer()
    with timer:
        for epoch in range(1, training.epochs + 1):
            order = rng.permutation(len(encoded))
            epoch_loss, epoch_tokens = 0.0, 0.0
            for start in range(0, len(order), training.batch_size):
                ids, mask = pad_batch([encoded[j] for j in order[start : start + training.batch_size]])
                loss, grads, _ = ad.value_and_grad(
                    lambda **nodes: _sequence_loss(model, ids, mask, nodes), arrays, wrt=list(arrays)
                )
                if not np.isfinite(loss):
                    raise NumericalError(
                        "training loss is not finite",
                        {"epoch": epoch, "batch": start // training.batch_size, "last_loss": last_finite},
                    )
                last_finite = loss
                arrays = optimizer.step(arrays, grads)
                n_targets = float(mask[:, 1:].sum())
                epoch_loss += loss * n_targets
                epoch_tokens += n_targets
            losses.append(epoch_loss / epoch_tokens)
            logger.progress(f"epoch {epoch}/{training.epochs}: cross-entropy {losses[-1]:.4f}")

    trained = LanguageModel(config, LMParameters(arrays).validate(config), vocabulary)
    return TrainingResult(trained, tuple(losses), timer.last)


def target_distributions(
    model: LanguageModel, prefixes: Sequence[Sequence[str]], batch_size: int = 256
) -> RealArray:
    """The distribution over ``x_n`` after each prefix ``x_1 ... x_{n-1}``, shape ``(N, V)``"""
    rows = []
    for start in range(0, len(prefixes), batch_size):
        chunk = [model.vocabulary.encode(p) for p in prefixes[start : start + batch_size]]
        ids, _ = pad_batch(chunk)
        logits = model.run(ids)
        rows.extend(ad.softmax(logits[len(p) - 1][row]) for row, p in enumerate(chunk))
    return np.stack(rows) if rows else np.zeros((0, model.config.vocab_size))


def agreement_accuracy(model: LanguageModel, instances: Sequence[Any]) -> float:
    """
    Fraction of instances where the model prefers the grammatical form ``d`` over ``t``.

    :param instances: :class:`~unitfinder_cli.lib.corpus.SentenceInstance` objects annotated at
        generation time (``d`` grammatical).
    :raises DataError: On an empty evaluation set.
    """
    if not instances:
        raise DataError("empty evaluation set")
    distributions = target_distributions(model, [instance.prefix for instance in instances])
    d_ids = model.vocabulary.encode(instance.d for instance in instances)
    t_ids = model.vocabulary.encode(instance.t for instance in instances)
    rows = np.arange(len(instances))
    return float(np.mean(distributions[rows, d_ids] > distributions[rows, t_ids]))


def perplexity(model: LanguageModel, sentences: Sequence[Sequence[str]], batch_size: int = 256) -> float:
    """``exp`` of the mean per-token cross-entropy, ``<eos>`` included as a target"""
    if not sentences:
        raise DataError("empty evaluation set")
    total, count = 0.0, 0.0
    for start in range(0, len(sentences), batch_size):
        chunk = [model.vocabulary.encode(s) + [EOS_ID] for s in sentences[start : start + batch_size]]
        ids, mask = pad_batch(chunk)
        n_targets = float(mask[:, 1:].sum())
        total += float(_sequence_loss(model, ids, mask, model.params.arrays)) * n_targets
        count += n_targets
    return float(np.exp(total / count))
