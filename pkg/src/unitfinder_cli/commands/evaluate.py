# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import Any, Optional

import click

from unitfinder_cli.commands import checkpoint_option, corpus_options, results_option
from unitfinder_cli.constants import DIRECTION_ANY, DIRECTIONS, MODE_EVERY, MODE_SINGLE
from unitfinder_cli.utils import BaseCommand, safe_stem
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@checkpoint_option()
@corpus_options(train=False)
@results_option()
@click.option(
    "--zero-mask",
    is_flag=True,
    help="""
    Evaluate the empty mask instead of stored results: the model is left untouched, so no
    instance flips and the retention loss is zero.
    """,
)
@click.option("--mode", type=click.Choice([MODE_SINGLE, MODE_EVERY]), help="Mode of the empty mask.")
@click.option(
    "--direction",
    type=click.Choice([DIRECTION_ANY, *DIRECTIONS]),
    help="Direction of the empty mask.",
)
def cli(
    manifest: Optional[Path],
    seed: Optional[int],  # pylint: disable=unused-argument
    output_dir: Optional[Path],
    checkpoint: Optional[Path],
    eval_corpus: Optional[Path],
    results: Optional[Path],
    zero_mask: bool,
    **options: Any,
) -> None:
    """
    Re-evaluates discovered units (or the empty mask) on an eval corpus.

    Every stored run is replayed with its binary mask, baselines, mode and direction. Writes
    ``<results>.evaluation.jsonl`` (or ``zero-mask.evaluation.jsonl``).
    """
    import numpy as np

    from unitfinder_cli import commands
    from unitfinder_cli.app.search import evaluate_mask, prepare_instances
    from unitfinder_cli.core.intervention import InterventionDataset
    from unitfinder_cli.core.lstm_lm import agreement_accuracy
    from unitfinder_cli.lib.manifest import load_manifest
    from unitfinder_cli.lib.results import read_results, write_records

    if zero_mask == (results is not None):
        raise click.UsageError("Pass either --results or --zero-mask.")

    experiment = load_manifest(manifest)
    model = commands.load_model(experiment, checkpoint)
    evaluation = commands.load_corpus(experiment, "eval_corpus", eval_corpus)

    preference = agreement_accuracy(model, evaluation)
    logger.opt(colors=True).info(
        f"Written form preferred in <cyan>{100 * preference:.1f}%</> of {len(evaluation)} instances"
    )

    # (run_id, mode, direction, mask, baseline)
    masks: list[tuple[str, str, str, Any, Any]]
    if results is not None:
        masks = [
            (run.run_id, run.mode, run.direction, run.mask(model.units), run.baseline_vector(model.units))
            for run in read_results(results)
        ]
        stem = safe_stem(results.name.split(".")[0])
    else:
        config = experiment.search_config(**options)
        empty = np.zeros(model.units)
        masks = [("zero-mask", config.mode, config.direction, empty, empty)]
        stem = "zero-mask"

    records = []
    for run_id, mode, direction, mask, baseline in masks:
        instances = prepare_instances(model, evaluation, direction)
        data = InterventionDataset.build(model, instances, mode)
        report = evaluate_mask(model, data, mask, baseline)
        logger.opt(colors=True).info(
            f"{run_id}: accuracy <cyan>{report.accuracy:.3f}</>, mean KL {report.mean_kl:.4f} "
            f"on {len(report)} instances"
        )
        records.append(
            {
                "run_id": run_id,
                "mode": mode,
                "direction": direction,
                "units": [int(u) for u in np.flatnonzero(mask)],
                "accuracy": report.accuracy,
                "mean_kl": report.mean_kl,
                "n_eval": len(report),
                "preference_accuracy": preference,
            }
        )
    path = write_records(experiment.output_dir(output_dir) / f"{stem}.evaluation.jsonl", records)
    logger.success(f"File saved to {path}")
