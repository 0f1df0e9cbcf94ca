from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Optional, get_type_hints

import numpy as np

from unitfinder_cli.app.search import SearchConfig, SearchResult, run_search
from unitfinder_cli.core.lstm_lm import LanguageModel
from unitfinder_cli.lib.corpus import SentenceInstance
from unitfinder_cli.utils.logger import logger
from unitfinder_cli.utils.timer import Timer


def run_seed(seed: int, repeat: int) -> int:
    """The seed of one repeat: the ``repeat``-th child of ``SeedSequence(seed)``"""
    child = np.random.SeedSequence(seed).spawn(repeat + 1)[repeat]
    return int(child.generate_state(1)[0])


@dataclass
class RunnerOptions:
    """
    How to schedule the repeats of a search.
    """

    repeats: int = 1
    workers: int = 1
    label: str = "run"


class SearchRunnerConfig:  # pylint: disable=too-few-public-methods
    """
    Split command options into runner options and search config overrides.
    """

    def __init__(self, base: SearchConfig, options: dict[str, Any]):
        self.runner_options = RunnerOptions()
        self.search_options: dict[str, Any] = {}
        self._handle_options(options)
        self.search_config = replace(base, **self.search_options)

    def _handle_options(self, options: dict[str, Any]) -> None:
        self._set_options(self.runner_options, options)
        self._parse_search_options(options)

    def _parse_search_options(self, options: dict[str, Any]) -> None:
        for key, value in options.items():
            if key in get_type_hints(SearchConfig) and value is not None:
                self.search_options.update({key: value})

    @staticmethod
    def _set_options(options_group: RunnerOptions, options: dict[str, Any]) -> None:
        """
        Update attributes of an options_group with provided options if the attribute exists.
        """
        for key, value in options.items():
            if hasattr(options_group, key) and value is not None:
                setattr(options_group, key, value)


@dataclass(frozen=True)
class SearchJob:
    """One repeat: its identifier and the config with the repeat's own seed"""

    run_id: str
    config: SearchConfig


def _run_job(
    model: LanguageModel,
    train: Sequence[SentenceInstance],
    evaluation: Sequence[SentenceInstance],
    job: SearchJob,
) -> SearchResult:
    return run_search(model, train, evaluation, job.config, run_id=job.run_id)


class SearchRunner:  # pylint: disable=too-few-public-methods
    """
    A class for running the repeats of a search, serially or in a process pool.

    Every repeat gets a seed derived from the base seed and its index, so results do not depend
    on the number of workers. Results are returned in repeat order.

    Attributes:
        model (LanguageModel): The model to search.
        train (Sequence[SentenceInstance]): The instances the masks are learned on.
        evaluation (Sequence[SentenceInstance]): The instances the discretized masks are scored on.
        config (SearchRunnerConfig): The search config and the scheduling options.
    """

    def __init__(
        self,
        model: LanguageModel,
        train: Sequence[SentenceInstance],
        evaluation: Sequence[SentenceInstance],
        base: Optional[SearchConfig] = None,
        **options: Any,
    ) -> None:
        self.model = model
        self.train = list(train)
        self.evaluation = list(evaluation)
        self.config = SearchRunnerConfig(base or SearchConfig(), options)

    def jobs(self) -> list[SearchJob]:
        search = self.config.search_config
        runner = self.config.runner_options
        return [
            SearchJob(
                run_id=f"{runner.label}-{repeat}",
                config=replace(search, seed=run_seed(search.seed, repeat)),
            )
            for repeat in range(runner.repeats)
        ]

    @Timer(logger=logger.opt(colors=True).info, text="Elapsed time <cyan>{:0.4f} seconds</>")
    def run(self) -> list[SearchResult]:
        """
        Executes every repeat.

        :raises UnitFinderError: The first error raised by a repeat, in repeat order.
        """
        jobs = self.jobs()
        workers = min(self.config.runner_options.workers, len(jobs))
        if workers <= 1:
            return [self._run_one(job) for job in jobs]
        logger.info(f"Running {len(jobs)} searches on {workers} workers")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_run_job, self.model, self.train, self.evaluation, job)
                for job in jobs
            ]
            return [self._collect(job, future.result()) for job, future in zip(jobs, futures)]

    def _run_one(self, job: SearchJob) -> SearchResult:
        logger.info(f"Searching {job.run_id} (seed {job.config.seed})")
        return self._collect(job, _run_job(self.model, self.train, self.evaluation, job))

    @staticmethod
    def _collect(job: SearchJob, result: SearchResult) -> SearchResult:
        logger.opt(colors=True).info(
            f"{job.run_id}: accuracy <cyan>{result.accuracy:.3f}</>, "
            f"{result.n_units} unit(s), KL {result.mean_kl:.4f}"
        )
        return result

