# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import Any, Optional

import click

from unitfinder_cli.commands import corpus_options, estimator_option, lm_options, lm_overrides
from unitfinder_cli.utils import BaseCommand, search_options
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@corpus_options()
@click.option(
    "--lm-seeds",
    type=click.IntRange(min=0),
    multiple=True,
    help="Seeds of the language models to train; can be repeated. Defaults to the manifest's.",
)
@lm_options()
@search_options()
@estimator_option()
def cli(
    manifest: Optional[Path],
    seed: Optional[int],
    output_dir: Optional[Path],
    train_corpus: Optional[Path],
    eval_corpus: Optional[Path],
    lm_seeds: tuple[int, ...],
    repeats: Optional[int],
    workers: int,
    num_layers: Optional[int],
    hidden_size: Optional[int],
    embedding_size: Optional[int],
    lm_epochs: Optional[int],
    batch_size: Optional[int],
    learning_rate: Optional[float],
    **options: Any,
) -> None:
    """
    Repeats the unit search over language models trained from different seeds.

    Every model is trained on the train corpus and searched ``--repeats`` times. Writes every run
    to ``robustness.results.jsonl``, the pooled unit prevalence to ``robustness.prevalence.tsv``
    and the study summary to ``robustness.json``.
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
    from unitfinder_cli.app.studies import robustness
    from unitfinder_cli.lib.manifest import load_manifest
    from unitfinder_cli.lib.results import write_json, write_records
    from unitfinder_cli.utils import write_tsv

    experiment = load_manifest(manifest)
    train = commands.load_corpus(experiment, "train_corpus", train_corpus)
    evaluation = commands.load_corpus(experiment, "eval_corpus", eval_corpus)
    overrides = lm_overrides(num_layers, hidden_size, embedding_size, lm_epochs, batch_size, learning_rate)
    training = experiment.training_config(**overrides)
    config = experiment.search_config(**options, seed=seed)
    seeds = list(lm_seeds or experiment.lm_seeds)
    repeats = repeats or experiment.repeats
    logger.info(f"Robustness over {len(seeds)} language model(s), {repeats} search(es) each")

    study = robustness(
        train,
        evaluation,
        seeds,
        repeats,
        lm_options=experiment.lm_options(**overrides),
        training=training,
        config=config,
        workers=workers,
    )

    out = experiment.output_dir(output_dir)
    results = [result for runs in study.results.values() for result in runs]
    paths = [
        write_records(out / "robustness.results.jsonl", [result.to_record() for result in results]),
        write_tsv(out / "robustness.prevalence.tsv", prevalence_rows(study.aggregate), PREVALENCE_COLUMNS),
        write_json(out / "robustness.json", study.to_record()),
    ]
    print_tables(runs_table(results), prevalence_table(study.aggregate), summary_table(study.aggregate))
    for lm_seed, accuracy in study.lm_accuracy.items():
        logger.info(f"LM seed {lm_seed}: written form preferred in {100 * accuracy:.1f}% of eval instances")
    for path in paths:
        logger.success(f"File saved to {path}")
