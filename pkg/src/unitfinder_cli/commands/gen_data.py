# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import Any, Optional

import click

from unitfinder_cli.constants import TASK_AGREEMENT, TASK_GENDER
from unitfinder_cli.utils import BaseCommand, safe_stem
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@click.option(
    "-t",
    "--task",
    type=click.Choice([TASK_AGREEMENT, TASK_GENDER]),
    help="""
    The corpus to generate. Defaults to the manifest's ``task``, then ``agreement``.
    """,
)
@click.option(
    "--n-train",
    type=click.IntRange(min=1),
    help="""
    Number of training instances. Agreement defaults to 11000; gender defaults to every instance
    not held out for evaluation.
    """,
)
@click.option(
    "--n-eval",
    type=click.IntRange(min=1),
    help="Number of evaluation instances (agreement 1000, gender 200 by default).",
)
@click.option(
    "--template",
    type=click.Choice(["simple", "adv", "pp", "pp_adv"]),
    help="""
    The agreement sentence shape: nothing, an adverb, a prepositional phrase with an attractor,
    or both between subject and verb. Defaults to ``pp``.
    """,
)
def cli(
    manifest: Optional[Path],
    seed: Optional[int],
    output_dir: Optional[Path],
    task: Optional[str],
    **options: Any,
) -> None:
    """
    Generates the train and eval corpora of a task.

    Writes ``<task>.train.tsv`` and ``<task>.eval.tsv`` to the output directory. Agreement
    sentences are checked with an independent rule-based validator.
    """
    from unitfinder_cli.errors import ConfigError
    from unitfinder_cli.lib.corpus import write_corpus
    from unitfinder_cli.lib.datagen import (
        generate_agreement_corpus,
        generate_gender_corpus,
        validate_agreement,
    )
    from unitfinder_cli.lib.manifest import load_manifest

    experiment = load_manifest(manifest)
    task = task or experiment.task
    seed = experiment.resolved_seed(seed)
    out = experiment.output_dir(output_dir)

    if task == TASK_AGREEMENT:
        config = experiment.agreement_config(**options)
        train, evaluation = generate_agreement_corpus(seed, config)
        invalid = sum(not validate_agreement(i, config.lexicon) for i in (*train, *evaluation))
        if invalid:
            logger.warning(f"{invalid} instance(s) fail the agreement validator")
        else:
            logger.info("Every instance passes the agreement validator")
    else:
        if options.get("template") is not None:
            raise ConfigError("--template only applies to the agreement task")
        options.pop("template", None)
        train, evaluation = generate_gender_corpus(seed, experiment.gender_config(**options))

    for split, instances in (("train", train), ("eval", evaluation)):
        path = write_corpus(out / f"{safe_stem(task)}.{split}.tsv", instances)
        logger.success(f"File saved to {path} ({len(instances)} instances)")
    logger.info(f"{task}: {len(train)} train, {len(evaluation)} eval, {len(train) + len(evaluation)} total")
