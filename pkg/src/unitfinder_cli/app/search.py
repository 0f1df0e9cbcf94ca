"""
Search for a sparse set of hidden units whose substitution flips the model's preference.

The mask is relaxed with a Hard Concrete distribution and learned together with the baseline by
descending on::

    mean ratio + λ₀ (C₀ - α k) + λ₁ (C₀,₁ - β) + w KL

while the multipliers ``λ₀, λ₁ ≥ 0`` ascend on their constraints. After training the mask is
discretized and re-evaluated on the eval split. :mod:`unitfinder_cli.app.reinforce` provides
the score-function alternative sharing the same driver.
"""

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Callable, Optional

import numpy as np

from unitfinder_cli.constants import (
    DIRECTION_ANY,
    DIRECTION_TO_PLURAL,
    DIRECTIONS,
    ESTIMATOR_HARD_CONCRETE,
    ESTIMATOR_REINFORCE,
    MODE_EVERY,
    MODE_SINGLE,
)
from unitfinder_cli.app.objective import assign_contrasts, batch_kl, batch_ratios, select_direction
from unitfinder_cli.core import autodiff as ad
from unitfinder_cli.core import hard_concrete as hc
from unitfinder_cli.core.autodiff import RealArray
from unitfinder_cli.core.intervention import InterventionBatch, InterventionDataset, intervened_logits
from unitfinder_cli.core.lstm_lm import LanguageModel
from unitfinder_cli.core.optim import Adam
from unitfinder_cli.errors import ConfigError, DataError, NumericalError
from unitfinder_cli.lib.corpus import SentenceInstance
from unitfinder_cli.utils.logger import logger
from unitfinder_cli.utils.timer import Timer

__all__ = [
    "MaskEvaluation",
    "RunAggregate",
    "SearchConfig",
    "SearchResult",
    "SearchState",
    "StepDiagnostics",
    "aggregate_runs",
    "ascend_multipliers",
    "constraint_violations",
    "evaluate_mask",
    "initial_state",
    "lagrangian_step",
    "make_result",
    "prepare_instances",
    "run_search",
    "trace_objective",
    "units_by_layer",
]

EVAL_BATCH_SIZE = 256


@dataclass(frozen=True)
class SearchConfig:
    """
    Hyperparameters of one search.

    ``alpha`` is a fraction of the k hidden units: the expected number of nonzero mask entries is
    held below ``alpha * k``. ``beta`` bounds the expected number of entries strictly between 0
    and 1 in absolute terms. Zero learning rates are accepted so that the multipliers can be
    frozen (``lambda_learning_rate = 0``).

    A run may stop before ``epochs`` once at least ``min_epochs`` have passed and, for
    ``patience`` epochs in a row, the expected C₀ has been within budget, the train accuracy has
    stayed at or above ``min_accuracy`` without improving, and neither has moved by more than its
    tolerance.
    """

    alpha: float = 0.05
    beta: float = 0.5
    lambda_init: float = 0.0
    learning_rate: float = 1e-1
    lambda_learning_rate: float = 1e-2
    kl_weight: float = 1.0
    epochs: int = 50
    batch_size: int = 32
    samples_per_step: int = 1
    seed: int = 0
    mode: str = MODE_SINGLE
    direction: str = DIRECTION_TO_PLURAL
    estimator: str = ESTIMATOR_HARD_CONCRETE
    temperature: float = hc.DEFAULT_TEMPERATURE
    lower: float = hc.DEFAULT_LOWER
    upper: float = hc.DEFAULT_UPPER
    initial_probability: float = 0.5
    patience: int = 5
    accuracy_tolerance: float = 0.01
    c0_tolerance: float = 0.5
    min_epochs: int = 10
    min_accuracy: float = 0.5
    moving_average_decay: float = 0.9
    discretize_samples: int = hc.DISCRETIZE_SAMPLES

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.beta <= 1:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if self.lambda_init < 0:
            raise ConfigError("lambda_init must be non-negative")
        if self.learning_rate < 0 or self.lambda_learning_rate < 0:
            raise ConfigError("learning rates must be non-negative")
        if self.kl_weight < 0:
            raise ConfigError("kl_weight must be non-negative")
        if min(self.epochs, self.batch_size, self.samples_per_step, self.patience) < 1:
            raise ConfigError("epochs, batch_size, samples_per_step and patience must be positive")
        if self.min_epochs < 0:
            raise ConfigError("min_epochs must be non-negative")
        if not 0 <= self.min_accuracy <= 1:
            raise ConfigError("min_accuracy must lie in [0, 1]")
        if self.mode not in (MODE_SINGLE, MODE_EVERY):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.direction != DIRECTION_ANY and self.direction not in DIRECTIONS:
            raise ConfigError(f"unknown direction {self.direction!r}")
        if self.estimator not in (ESTIMATOR_HARD_CONCRETE, ESTIMATOR_REINFORCE):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if not 0 <= self.moving_average_decay < 1:
            raise ConfigError("moving_average_decay must lie in [0, 1)")
        hc.HardConcreteParams(np.zeros(1), self.temperature, self.lower, self.upper)

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def distribution(self, location: Any) -> hc.HardConcreteParams:
        return hc.HardConcreteParams(location, self.temperature, self.lower, self.upper)


@dataclass
class SearchState:
    """Mask locations ``γ``, unconstrained baseline (``b = tanh``), multipliers and optimizer."""

    location: RealArray
    baseline_logits: RealArray
    lambdas: RealArray
    optimizer: Adam
    step: int = 0
    moving_average: Optional[float] = None

    @property
    def baseline(self) -> RealArray:
        return np.tanh(self.baseline_logits)


def initial_state(units: int, config: SearchConfig) -> SearchState:
    """Every unit nonzero with ``initial_probability``, baseline 0, multipliers at ``lambda_init``"""
    if config.estimator == ESTIMATOR_REINFORCE:
        p = config.initial_probability
        location = np.full(units, np.log(p / (1 - p)))
    else:
        location = hc.HardConcreteParams.initial(
            units, config.initial_probability, config.temperature, config.lower, config.upper
        ).location
    return SearchState(
        location=np.asarray(location, dtype=np.float64),
        baseline_logits=np.zeros(units),
        lambdas=np.full(2, float(config.lambda_init)),
        optimizer=Adam(config.learning_rate),
    )


@dataclass(frozen=True)
class StepDiagnostics:
    """What one update saw"""

    objective: float
    ratio: float
    c0: float
    interior: float
    kl: float
    flips: int
    rows: int
    lambdas: tuple[float, float]


def trace_objective(
    model: LanguageModel,
    batch: InterventionBatch,
    config: SearchConfig,
    lambdas: RealArray,
    noise: RealArray,
    location: RealArray,
    baseline_logits: RealArray,
) -> ad.Evaluation:
    """
    Record the relaxed objective for fixed noise ``u`` (``(B, k)``, one mask per row).

    Inputs are ``location`` and ``baseline_logits``; outputs are ``objective`` and its terms
    ``ratios`` (per row), ``c0``, ``interior`` and ``kl``.
    """
    tracer = ad.Tracer()
    gamma = tracer.input("location", location)
    raw = tracer.input("baseline_logits", baseline_logits)
    params = config.distribution(gamma)
    z = hc.relaxed_mask(params, noise)
    logits = intervened_logits(model, batch, z, ad.tanh(raw))
    ratios = tracer.output("ratios", batch_ratios(batch, logits))
    c0 = tracer.output("c0", hc.expected_c0(params))
    interior = tracer.output("interior", hc.interior_mass(params))
    units = float(len(location))
    objective = ad.mean(ratios)
    objective = objective + float(lambdas[0]) * (c0 - config.alpha * units)
    objective = objective + float(lambdas[1]) * (interior - config.beta)
    if config.kl_weight > 0:
        kl = tracer.output("kl", batch_kl(batch, logits))
        objective = objective + config.kl_weight * kl
    tracer.output("objective", objective)
    return tracer.evaluation()


def _check_finite(state: SearchState, values: dict[str, float]) -> None:
    if not all(np.isfinite(v) for v in values.values()):
        raise NumericalError(
            "search objective is not finite",
            {"step": state.step, **values, "lambdas": state.lambdas.tolist()},
        )


def ascend_multipliers(
    lambdas: RealArray, violations: Sequence[float], learning_rate: float
) -> RealArray:
    """One projected ascent step: ``λ ← max(0, λ + lr · violation)``"""
    return np.maximum(0.0, lambdas + learning_rate * np.asarray(violations, dtype=np.float64))


def constraint_violations(
    c0: float, interior: float, units: int, config: SearchConfig
) -> tuple[float, float]:
    """
    How far the expected C₀ and the interior mass lie above their budgets, each as a fraction of
    its budget (the C₀ budget taken as at least one unit) and clipped to ``[-1, 1]``.

    The multipliers then move by at most their learning rate per step in either direction.
    """
    budget = config.alpha * units
    return (
        float(np.clip((c0 - budget) / max(budget, 1.0), -1.0, 1.0)),
        float(np.clip((interior - config.beta) / config.beta, -1.0, 1.0)),
    )


def lagrangian_step(
    state: SearchState,
    batch: InterventionBatch,
    model: LanguageModel,
    config: SearchConfig,
    rng: np.random.Generator,
) -> tuple[SearchState, StepDiagnostics]:
    """
    One update with a fresh mask sample per row: Adam descent on ``(γ, b)``, projected ascent on
    ``(λ₀, λ₁)``.

    :raises NumericalError: If the objective or one of its terms is not finite.
    """
    units = len(state.location)
    noise = hc.draw_noise(rng, (len(batch), units))
    evaluation = trace_objective(
        model, batch, config, state.lambdas, noise, state.location, state.baseline_logits
    )
    values = {
        "objective": float(evaluation["objective"]),
        "ratio": float(np.mean(evaluation["ratios"])),
        "c0": float(evaluation["c0"]),
        "interior": float(evaluation["interior"]),
        "kl": float(evaluation["kl"]) if config.kl_weight > 0 else 0.0,
    }
    _check_finite(state, values)

    grads = ad.backpropagate(evaluation, "objective", ["location", "baseline_logits"])
    updated, optimizer = state.optimizer.step(
        {"location": state.location, "baseline_logits": state.baseline_logits}, grads
    )
    lambdas = ascend_multipliers(
        state.lambdas,
        constraint_violations(values["c0"], values["interior"], units, config),
        config.lambda_learning_rate,
    )
    new_state = replace(
        state,
        location=updated["location"],
        baseline_logits=updated["baseline_logits"],
        lambdas=lambdas,
        optimizer=optimizer,
        step=state.step + 1,
    )
    diagnostics = StepDiagnostics(
        objective=values["objective"],
        ratio=values["ratio"],
        c0=values["c0"],
        interior=values["interior"],
        kl=values["kl"],
        flips=int(np.sum(evaluation["ratios"] < 1.0)),
        rows=len(batch),
        lambdas=(float(lambdas[0]), float(lambdas[1])),
    )
    return new_state, diagnostics


@dataclass(frozen=True)
class MaskEvaluation:
    """Flip accuracy and retention of a frozen mask on a set of instances"""

    accuracy: float
    mean_kl: float
    ratios: RealArray
    kl: RealArray

    def __len__(self) -> int:
        return len(self.ratios)


def evaluate_mask(
    model: LanguageModel,
    data: InterventionDataset,
    mask: RealArray,
    baseline: RealArray,
) -> MaskEvaluation:
    """
    Re-run every instance with a frozen mask and baseline.

    Accuracy is the fraction of instances whose ratio ``p(d) / p(t)`` falls below 1; the KL is
    averaged first over each instance's prefix steps, then over instances.

    :raises DataError: On an empty evaluation set.
    """
    if not len(data):
        raise DataError("empty evaluation set")
    mask = np.asarray(mask, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    ratios, kls = [], []
    for start in range(0, len(data), EVAL_BATCH_SIZE):
        batch = data.batch(model, range(start, min(start + EVAL_BATCH_SIZE, len(data))))
        logits = intervened_logits(model, batch, mask, baseline)
        ratios.append(np.asarray(batch_ratios(batch, logits)))
        kls.append(np.asarray(batch_kl(batch, logits, reduce=False)))
    all_ratios, all_kl = np.concatenate(ratios), np.concatenate(kls)
    return MaskEvaluation(
        accuracy=float(np.mean(all_ratios < 1.0)),
        mean_kl=float(np.mean(all_kl)),
        ratios=all_ratios,
        kl=all_kl,
    )


@dataclass(frozen=True)
class SearchResult:
    """
    The discovered units of one run and their evaluation.

    Unit ids index the concatenation of the layers' hidden vectors; ``units_by_layer`` gives the
    same units as ``[layer, index in layer]``.
    """

    run_id: str
    estimator: str
    mode: str
    direction: str
    seed: int
    units: tuple[int, ...]
    units_by_layer: tuple[tuple[int, int], ...]
    baselines: tuple[float, ...]
    accuracy: float
    n_units: int
    mean_kl: float
    expected_c0: float
    budget: float
    steps: int
    epochs: int
    converged: bool
    n_train: int
    n_eval: int
    seconds: float = 0.0
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        """No unit survived discretization (empty mask)"""
        return self.n_units == 0

    @property
    def constraint_violated(self) -> bool:
        """More units than the sparsity budget ``alpha * k``"""
        return self.n_units > self.budget

    def to_record(self) -> dict[str, Any]:
        record = asdict(self)
        record["units"] = list(self.units)
        record["units_by_layer"] = [list(pair) for pair in self.units_by_layer]
        record["baselines"] = list(self.baselines)
        record["degenerate"] = self.degenerate
        record["constraint_violated"] = self.constraint_violated
        return record

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "SearchResult":
        """
        :raises DataError: If a field is missing.
        """
        names = {f.name for f in fields(cls)}
        missing = names - set(record) - {"seconds", "config"}
        if missing:
            raise DataError(f"result record lacks {', '.join(sorted(missing))}")
        values = {name: record[name] for name in names if name in record}
        values["units"] = tuple(int(u) for u in values["units"])
        values["units_by_layer"] = tuple((int(a), int(b)) for a, b in values["units_by_layer"])
        values["baselines"] = tuple(float(b) for b in values["baselines"])
        return cls(**values)

    def mask(self, units: int) -> RealArray:
        mask = np.zeros(units)
        mask[list(self.units)] = 1.0
        return mask

    def baseline_vector(self, units: int) -> RealArray:
        baseline = np.zeros(units)
        baseline[list(self.units)] = self.baselines
        return baseline


def units_by_layer(units: Sequence[int], hidden_size: int) -> tuple[tuple[int, int], ...]:
    return tuple((int(u) // hidden_size, int(u) % hidden_size) for u in units)


def prepare_instances(
    model: LanguageModel, instances: Sequence[SentenceInstance], direction: str
) -> list[SentenceInstance]:
    """Assign contrasts by model preference and keep the instances of ``direction``"""
    return select_direction(instances, assign_contrasts(model, instances), direction)


def make_result(
    model: LanguageModel,
    config: SearchConfig,
    mask: RealArray,
    baseline: RealArray,
    evaluation: MaskEvaluation,
    run_id: str,
    **extra: Any,
) -> SearchResult:
    """Build a result record for a frozen mask and its evaluation"""
    units = tuple(int(u) for u in np.flatnonzero(mask))
    values: dict[str, Any] = {
        "expected_c0": float(np.sum(mask)),
        "steps": 0,
        "epochs": 0,
        "converged": False,
        "n_train": 0,
        **extra,
    }
    return SearchResult(
        run_id=run_id,
        estimator=config.estimator,
        mode=config.mode,
        direction=config.direction,
        seed=config.seed,
        units=units,
        units_by_layer=units_by_layer(units, model.config.hidden_size),
        baselines=tuple(float(baseline[u]) for u in units),
        accuracy=evaluation.accuracy,
        n_units=len(units),
        mean_kl=evaluation.mean_kl,
        budget=config.alpha * model.units,
        n_eval=len(evaluation),
        config=config.to_dict(),
        **values,
    )


@dataclass
class _Stability:
    """
    Counts consecutive epochs that look converged: the expected C₀ within budget, the accuracy at
    or above ``min_accuracy`` and no better than the best seen so far, and neither moving by more
    than its tolerance since the previous epoch.
    """

    patience: int
    accuracy_tolerance: float
    c0_tolerance: float
    budget: float
    min_epochs: int = 0
    min_accuracy: float = 0.0
    previous: Optional[tuple[float, float]] = None
    best_accuracy: float = float("-inf")
    stable_epochs: int = 0

    @classmethod
    def of(cls, config: SearchConfig, units: int) -> "_Stability":
        return cls(
            config.patience,
            config.accuracy_tolerance,
            config.c0_tolerance,
            config.alpha * units,
            config.min_epochs,
            config.min_accuracy,
        )

    def update(self, epoch: int, accuracy: float, c0: float) -> bool:
        improving = accuracy > self.best_accuracy + self.accuracy_tolerance
        self.best_accuracy = max(self.best_accuracy, accuracy)
        settled = (
            self.previous is not None
            and abs(accuracy - self.previous[0]) <= self.accuracy_tolerance
            and abs(c0 - self.previous[1]) <= self.c0_tolerance
        )
        within_budget = c0 <= self.budget + self.c0_tolerance
        if settled and within_budget and not improving and accuracy >= self.min_accuracy:
            self.stable_epochs += 1
        else:
            self.stable_epochs = 0
        self.previous = (accuracy, c0)
        return epoch >= self.min_epochs and self.stable_epochs >= self.patience


def run_search(
    model: LanguageModel,
    train: Sequence[SentenceInstance],
    evaluation: Sequence[SentenceInstance],
    config: Optional[SearchConfig] = None,
    run_id: str = "run-0",
) -> SearchResult:
    """
    Learn a mask and a baseline on ``train`` and evaluate the discretized mask on ``evaluation``.

    Training stops after ``epochs`` passes, or earlier once it has settled (see
    :class:`SearchConfig`).

    :raises DataError: If no instance is left for the requested direction.
    :raises NumericalError: If the objective stops being finite.
    """
    config = config or SearchConfig()
    # imported here: the score-function estimator reuses this module's state and diagnostics
    from unitfinder_cli.app.reinforce import discretize_bernoulli, reinforce_step

    timer = Timer()
    timer.start()
    train_instances = prepare_instances(model, train, config.direction)
    eval_instances = prepare_instances(model, evaluation, config.direction)
    if not train_instances or not eval_instances:
        raise DataError(
            f"no {'train' if not train_instances else 'eval'} instance left for direction "
            f"{config.direction!r}"
        )
    train_data = InterventionDataset.build(model, train_instances, config.mode)
    eval_data = InterventionDataset.build(model, eval_instances, config.mode)
    logger.debug(f"{run_id}: {len(train_data)} train and {len(eval_data)} eval instances")

    step: Callable[..., tuple[SearchState, StepDiagnostics]]
    step = reinforce_step if config.estimator == ESTIMATOR_REINFORCE else lagrangian_step
    rng = np.random.default_rng(config.seed)
    state = initial_state(model.units, config)
    stability = _Stability.of(config, model.units)
    converged = False
    epoch = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_data))
        flips = rows = 0
        diagnostics = None
        for start in range(0, len(order), config.batch_size):
            indices = np.repeat(order[start : start + config.batch_size], config.samples_per_step)
            batch = train_data.batch(model, indices)
            state, diagnostics = step(state, batch, model, config, rng)
            flips += diagnostics.flips
            rows += diagnostics.rows
        accuracy = flips / rows
        assert diagnostics is not None
        logger.progress(
            f"{run_id} epoch {epoch}/{config.epochs}: train accuracy {accuracy:.3f}, "
            f"C0 {diagnostics.c0:.2f}, interior {diagnostics.interior:.2f}, "
            f"KL {diagnostics.kl:.4f}, λ {diagnostics.lambdas[0]:.3f}/{diagnostics.lambdas[1]:.3f}"
        )
        if stability.update(epoch, accuracy, diagnostics.c0):
            converged = True
            break

    if config.estimator == ESTIMATOR_REINFORCE:
        mask = discretize_bernoulli(state.location)
        expected = float(np.sum(ad.sigmoid(state.location)))
    else:
        params = config.distribution(state.location)
        mask = hc.discretize(params, config.discretize_samples, seed=config.seed)
        expected = float(hc.expected_c0(params))
    baseline = state.baseline
    report = evaluate_mask(model, eval_data, mask, baseline)
    seconds = timer.stop()

    result = make_result(
        model,
        config,
        mask,
        baseline,
        report,
        run_id,
        expected_c0=expected,
        steps=state.step,
        epochs=epoch,
        converged=converged,
        n_train=len(train_data),
        seconds=seconds,
    )
    if result.degenerate:
        logger.warning(f"{run_id}: degenerate (empty mask)")
    elif result.constraint_violated:
        logger.warning(f"{run_id}: {result.n_units} units exceed the budget of {result.budget:.1f}")
    return result


@dataclass(frozen=True)
class RunAggregate:
    """
    Several runs summarized: unit prevalence (fraction of runs selecting each unit), baseline
    mean and standard deviation per direction and unit, and mean ± std of the run metrics.
    """

    runs: int
    prevalence: dict[int, float]
    locations: dict[int, tuple[int, int]]
    baselines: dict[str, dict[int, tuple[float, float]]]
    accuracy: tuple[float, float]
    units: tuple[float, float]
    kl: tuple[float, float]
    seconds: tuple[float, float]

    def to_record(self) -> dict[str, Any]:
        return {
            "runs": self.runs,
            "prevalence": {str(u): p for u, p in self.prevalence.items()},
            "locations": {str(u): list(loc) for u, loc in self.locations.items()},
            "baselines": {
                direction: {str(u): list(stats) for u, stats in values.items()}
                for direction, values in self.baselines.items()
            },
            "accuracy": list(self.accuracy),
            "units": list(self.units),
            "kl": list(self.kl),
            "seconds": list(self.seconds),
        }


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    array = np.asarray(values, dtype=np.float64)
    return float(np.mean(array)), float(np.std(array))


def aggregate_runs(results: Sequence[SearchResult]) -> RunAggregate:
    """
    :raises DataError: On an empty list of results.
    """
    if not results:
        raise DataError("no search results to aggregate")
    counts: dict[int, int] = {}
    locations: dict[int, tuple[int, int]] = {}
    values: dict[str, dict[int, list[float]]] = {}
    for result in results:
        for unit, location, baseline in zip(result.units, result.units_by_layer, result.baselines):
            locations[unit] = location
            counts[unit] = counts.get(unit, 0) + 1
            values.setdefault(result.direction, {}).setdefault(unit, []).append(baseline)
    prevalence = {
        unit: count / len(results)
        for unit, count in sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    }
    baselines = {
        direction: {unit: _mean_std(per_unit[unit]) for unit in sorted(per_unit)}
        for direction, per_unit in sorted(values.items())
    }
    return RunAggregate(
        runs=len(results),
        prevalence=prevalence,
        locations={unit: locations[unit] for unit in prevalence},
        baselines=baselines,
        accuracy=_mean_std([r.accuracy for r in results]),
        units=_mean_std([r.n_units for r in results]),
        kl=_mean_std([r.mean_kl for r in results]),
        seconds=_mean_std([r.seconds for r in results]),
    )
