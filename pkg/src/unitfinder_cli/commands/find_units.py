# pylint: disable=import-outside-toplevel
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

import click

from unitfinder_cli.commands import checkpoint_option, corpus_options, estimator_option
from unitfinder_cli.utils import BaseCommand, safe_stem, search_options
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@checkpoint_option()
@corpus_options()
@search_options()
@estimator_option()
@click.option(
    "-l",
    "--label",
    help="""
    Prefix of the run identifiers and of the output files. Defaults to
    ``<task>-<mode>``.
    """,
)
def cli(
    manifest: Optional[Path],
    seed: Optional[int],
    output_dir: Optional[Path],
    checkpoint: Optional[Path],
    train_corpus: Optional[Path],
    eval_corpus: Optional[Path],
    label: Optional[str],
    repeats: Optional[int],
    workers: int,
    **options: Any,
) -> None:
    """
    Searches for a sparse set of hidden units whose substitution flips the model's preference.

    Every repeat learns a mask and a baseline on the train corpus with its own seed, discretizes
    the mask and evaluates it on the eval corpus. Without ``--direction`` (here or in the
    manifest), each of the task's directions gets its own masks and baselines; a direction with no
    instance in one of the corpora is skipped. Run identifiers are ``<label>-<direction>-<repeat>``.
    Writes one record per run to ``<label>.results.jsonl``, the unit prevalence to
    ``<label>.prevalence.tsv`` and the aggregate to ``<label>.aggregate.json``.
    """
    from unitfinder_cli import commands
    from unitfinder_cli.app.report import (
        PREVALENCE_COLUMNS,
        prevalence_rows,
        prevalence_table,
        print_tables,
        runs_table,
        summary_table,
    )
    from unitfinder_cli.app.search import aggregate_runs, prepare_instances
    from unitfinder_cli.errors import DataError
    from unitfinder_cli.lib.manifest import load_manifest
    from unitfinder_cli.lib.results import write_json, write_records
    from unitfinder_cli.utils import write_tsv
    from unitfinder_cli.utils.task_runner import SearchRunner

    experiment = load_manifest(manifest)
    model = commands.load_model(experiment, checkpoint)
    train = commands.load_corpus(experiment, "train_corpus", train_corpus)
    evaluation = commands.load_corpus(experiment, "eval_corpus", eval_corpus)
    directions = experiment.directions(options.pop("direction", None))
    base = experiment.search_config(**options, seed=seed)
    label = label or f"{experiment.task}-{base.mode}"

    results = []
    for direction in directions:
        config = replace(base, direction=direction)
        if len(directions) > 1 and not (
            prepare_instances(model, train, direction) and prepare_instances(model, evaluation, direction)
        ):
            logger.warning(f"Skipping direction {direction}: no instance of it in the train or eval corpus")
            continue
        logger.info(
            f"Searching {model.units} units: {config.estimator}, mode {config.mode}, "
            f"direction {direction}, alpha {config.alpha}"
        )
        runner = SearchRunner(
            model,
            train,
            evaluation,
            config,
            repeats=repeats or experiment.repeats,
            workers=workers,
            label=f"{label}-{direction}",
        )
        results.extend(runner.run())
    if not results:
        raise DataError(f"no instance left for any of {', '.join(directions)}")
    aggregate = aggregate_runs(results)

    out = experiment.output_dir(output_dir)
    stem = safe_stem(label)
    paths = [
        write_records(out / f"{stem}.results.jsonl", [result.to_record() for result in results]),
        write_tsv(out / f"{stem}.prevalence.tsv", prevalence_rows(aggregate), PREVALENCE_COLUMNS),
        write_json(out / f"{stem}.aggregate.json", aggregate.to_record()),
    ]
    print_tables(runs_table(results), prevalence_table(aggregate), summary_table(aggregate))
    for path in paths:
        logger.success(f"File saved to {path}")
