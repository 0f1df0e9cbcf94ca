"""
Multi-run studies built on :func:`~unitfinder_cli.app.search.run_search`: the comparison of
the two mask estimators under one budget, and the robustness of the search across language
models trained from different seeds.
"""

from collections.abc import Sequence
from dataclasses import asdict, dataclass, replace
from typing import Any, Optional

from unitfinder_cli.app.search import RunAggregate, SearchConfig, SearchResult, aggregate_runs, run_search
from unitfinder_cli.constants import ESTIMATOR_HARD_CONCRETE, ESTIMATOR_REINFORCE
from unitfinder_cli.core.lstm_lm import (
    LanguageModel,
    LMConfig,
    TrainingConfig,
    agreement_accuracy,
    train_lm,
)
from unitfinder_cli.lib.corpus import SentenceInstance
from unitfinder_cli.lib.datagen import build_vocabulary
from unitfinder_cli.utils.logger import logger
from unitfinder_cli.utils.task_runner import SearchRunner, run_seed

__all__ = [
    "ComparisonRow",
    "RobustnessStudy",
    "compare_estimators",
    "robustness",
]

ESTIMATORS = (ESTIMATOR_HARD_CONCRETE, ESTIMATOR_REINFORCE)


@dataclass(frozen=True)
class ComparisonRow:
    """One estimator run: accuracy, units, steps to its stopping point and wall-clock"""

    estimator: str
    alpha: float
    trial: int
    seed: int
    accuracy: float
    units: int
    steps: int
    epochs: int
    converged: bool
    seconds: float

    @classmethod
    def from_result(cls, result: SearchResult, alpha: float, trial: int) -> "ComparisonRow":
        return cls(
            estimator=result.estimator,
            alpha=alpha,
            trial=trial,
            seed=result.seed,
            accuracy=result.accuracy,
            units=result.n_units,
            steps=result.steps,
            epochs=result.epochs,
            converged=result.converged,
            seconds=result.seconds,
        )

    def to_record(self) -> dict[str, Any]:
        return asdict(self)


def compare_estimators(
    model: LanguageModel,
    train: Sequence[SentenceInstance],
    evaluation: Sequence[SentenceInstance],
    alphas: Sequence[float],
    config: Optional[SearchConfig] = None,
    trials: int = 3,
) -> list[ComparisonRow]:
    """
    Run both estimators for every ``alpha`` and trial under the same epoch and batch budget.

    Trial ``j`` uses the same seed for both estimators, so identical inputs give identical rows
    apart from wall-clock.
    """
    config = config or SearchConfig()
    rows = []
    for alpha in alphas:
        for trial in range(trials):
            seed = run_seed(config.seed, trial)
            for estimator in ESTIMATORS:
                run_config = replace(config, alpha=alpha, estimator=estimator, seed=seed)
                run_id = f"{estimator}-a{alpha:g}-{trial}"
                result = run_search(model, train, evaluation, run_config, run_id=run_id)
                rows.append(ComparisonRow.from_result(result, alpha, trial))
    return rows


@dataclass(frozen=True)
class RobustnessStudy:
    """Results grouped by the seed of the language model, and their aggregate over all runs"""

    results: dict[int, list[SearchResult]]
    lm_accuracy: dict[int, float]
    aggregate: RunAggregate

    def to_record(self) -> dict[str, Any]:
        return {
            "lm_seeds": sorted(self.results),
            "lm_accuracy": {str(seed): accuracy for seed, accuracy in self.lm_accuracy.items()},
            "aggregate": self.aggregate.to_record(),
        }


def robustness(
    train: Sequence[SentenceInstance],
    evaluation: Sequence[SentenceInstance],
    lm_seeds: Sequence[int],
    repeats: int,
    lm_options: Optional[dict[str, Any]] = None,
    training: Optional[TrainingConfig] = None,
    config: Optional[SearchConfig] = None,
    workers: int = 1,
) -> RobustnessStudy:
    """
    Train one language model per seed in ``lm_seeds`` on the sentences of ``train`` and run the
    search ``repeats`` times on each.

    :param lm_options: :class:`~unitfinder_cli.core.lstm_lm.LMConfig` fields other than the
        vocabulary size.
    """
    vocabulary = build_vocabulary([*train, *evaluation])
    lm_config = LMConfig(vocab_size=len(vocabulary), **(lm_options or {}))
    training = training or TrainingConfig()
    sentences = [instance.tokens for instance in train]
    results: dict[int, list[SearchResult]] = {}
    accuracy: dict[int, float] = {}
    for lm_seed in lm_seeds:
        logger.info(f"Training language model with seed {lm_seed}")
        model = train_lm(lm_config, vocabulary, sentences, replace(training, seed=lm_seed)).model
        accuracy[lm_seed] = agreement_accuracy(model, evaluation)
        runner = SearchRunner(
            model, train, evaluation, config, repeats=repeats, workers=workers, label=f"lm{lm_seed}"
        )
        results[lm_seed] = runner.run()
    aggregate = aggregate_runs([result for runs in results.values() for result in runs])
    return RobustnessStudy(results, accuracy, aggregate)
