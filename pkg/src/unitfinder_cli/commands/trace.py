# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import Optional

import click

from unitfinder_cli.commands import checkpoint_option, corpus_options, results_option
from unitfinder_cli.utils import BaseCommand, safe_stem
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@checkpoint_option()
@corpus_options(train=False)
@results_option(required=True)
@click.option("--run-id", help="The run whose mask is traced. Defaults to the first run of the file.")
@click.option(
    "-i",
    "--index",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="0-based index of the instance in the eval corpus.",
)
def cli(
    manifest: Optional[Path],
    seed: Optional[int],  # pylint: disable=unused-argument
    output_dir: Optional[Path],
    checkpoint: Optional[Path],
    eval_corpus: Optional[Path],
    results: Path,
    run_id: Optional[str],
    index: int,
) -> None:
    """
    Traces one eval instance through the model with and without a discovered intervention.

    Writes ``trace-<run>-<index>.tsv`` with one row per prefix step and selected unit: the
    original and substituted activation, and the probabilities of both contrast forms after the
    step in each run.
    """
    from unitfinder_cli import commands
    from unitfinder_cli.app.objective import assign_contrast
    from unitfinder_cli.core.intervention import (
        InterventionParams,
        forward_with_intervention,
        trace_rows,
        write_trace,
    )
    from unitfinder_cli.errors import DataError
    from unitfinder_cli.lib.manifest import load_manifest
    from unitfinder_cli.lib.results import read_results

    experiment = load_manifest(manifest)
    model = commands.load_model(experiment, checkpoint)
    evaluation = commands.load_corpus(experiment, "eval_corpus", eval_corpus)

    runs = read_results(results)
    if not runs:
        raise DataError(f"{results}: no search results")
    if run_id is None:
        run = runs[0]
    else:
        matching = [r for r in runs if r.run_id == run_id]
        if not matching:
            raise DataError(f"{results}: no run with id {run_id!r}")
        run = matching[0]
    if index >= len(evaluation):
        raise DataError(f"index {index} out of range for an eval corpus of {len(evaluation)} instances")

    instance = assign_contrast(evaluation[index], model)
    params = InterventionParams(run.mask(model.units), run.baseline_vector(model.units), run.mode)
    distribution, trace = forward_with_intervention(model, params, instance)
    d_id, t_id = model.vocabulary.id(instance.d), model.vocabulary.id(instance.t)
    logger.opt(colors=True).info(
        f"{instance.text}: p({instance.d}) = {distribution[d_id]:.4f}, "
        f"p({instance.t}) = <cyan>{distribution[t_id]:.4f}</> with {len(run.units)} unit(s) replaced"
    )

    rows = trace_rows(trace, run.units, d_id, t_id)
    name = f"trace-{safe_stem(run.run_id)}-{index}.tsv"
    path = write_trace(experiment.output_dir(output_dir) / name, rows)
    logger.success(f"File saved to {path}")
