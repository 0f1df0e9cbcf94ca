# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import Any, Optional

import click

from unitfinder_cli.commands import checkpoint_option, corpus_options
from unitfinder_cli.utils import BaseCommand, search_options
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@checkpoint_option()
@corpus_options()
@search_options(runner=False)
@click.option(
    "-a",
    "--alphas",
    type=click.FloatRange(min=0.0, min_open=True, max=1.0),
    multiple=True,
    help="""
    Sparsity budgets to compare at; can be repeated. Defaults to 0.02.
    """,
)
@click.option(
    "--trials",
    type=click.IntRange(min=1),
    default=3,
    show_default=True,
    help="Runs per estimator and budget.",
)
def cli(
    manifest: Optional[Path],
    seed: Optional[int],
    output_dir: Optional[Path],
    checkpoint: Optional[Path],
    train_corpus: Optional[Path],
    eval_corpus: Optional[Path],
    alphas: tuple[float, ...],
    trials: int,
    **options: Any,
) -> None:
    """
    Compares the Hard Concrete and REINFORCE mask estimators under the same budget.

    Both estimators share the seed of every trial. Writes every run to ``comparison.jsonl`` and
    the per-estimator means to ``comparison.tsv``.
    """
    from unitfinder_cli import commands
    from unitfinder_cli.app.report import (
        COMPARISON_COLUMNS,
        comparison_summary,
        comparison_table,
        print_tables,
    )
    from unitfinder_cli.app.studies import compare_estimators
    from unitfinder_cli.lib.manifest import load_manifest
    from unitfinder_cli.lib.results import write_records
    from unitfinder_cli.utils import write_tsv

    experiment = load_manifest(manifest)
    model = commands.load_model(experiment, checkpoint)
    train = commands.load_corpus(experiment, "train_corpus", train_corpus)
    evaluation = commands.load_corpus(experiment, "eval_corpus", eval_corpus)
    config = experiment.search_config(**options, seed=seed)
    alphas = alphas or (0.02,)
    logger.info(f"Comparing estimators at alpha {', '.join(f'{a:g}' for a in alphas)}, {trials} trial(s) each")

    rows = compare_estimators(model, train, evaluation, alphas, config, trials)

    out = experiment.output_dir(output_dir)
    paths = [
        write_records(out / "comparison.jsonl", [row.to_record() for row in rows]),
        write_tsv(out / "comparison.tsv", comparison_summary(rows), COMPARISON_COLUMNS),
    ]
    print_tables(comparison_table(rows))
    for path in paths:
        logger.success(f"File saved to {path}")
