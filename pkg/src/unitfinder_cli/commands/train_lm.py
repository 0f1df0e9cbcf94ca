# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import Any, Optional

import click

from unitfinder_cli.commands import corpus_options, lm_options, lm_overrides
from unitfinder_cli.utils import BaseCommand
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@corpus_options()
@lm_options()
@click.option(
    "-c",
    "--checkpoint",
    type=click.Path(dir_okay=False, path_type=Path),
    help="""
    Where to write the checkpoint. Defaults to the manifest's ``checkpoint``, then to
    ``lm.ckpt`` in the output directory.
    """,
)
def cli(
    manifest: Optional[Path],
    seed: Optional[int],
    output_dir: Optional[Path],
    train_corpus: Optional[Path],
    eval_corpus: Optional[Path],
    checkpoint: Optional[Path],
    **options: Any,
) -> None:
    """
    Trains the language model on the sentences of a corpus.

    The vocabulary covers the train corpus and, when given, the eval corpus. Next to the
    checkpoint, ``<checkpoint>.metrics.json`` records the per-epoch losses and, on the eval
    corpus, the perplexity and the fraction of instances where the written form is preferred.
    """
    from unitfinder_cli import commands
    from unitfinder_cli.core.lstm_lm import agreement_accuracy, perplexity, train_lm
    from unitfinder_cli.lib.checkpoint import save_checkpoint
    from unitfinder_cli.lib.datagen import build_vocabulary
    from unitfinder_cli.lib.manifest import load_manifest
    from unitfinder_cli.lib.results import write_json

    experiment = load_manifest(manifest)
    train = commands.load_corpus(experiment, "train_corpus", train_corpus)
    evaluation = []
    if eval_corpus is not None or experiment.eval_corpus is not None:
        evaluation = commands.load_corpus(experiment, "eval_corpus", eval_corpus)

    overrides = lm_overrides(**options)
    vocabulary = build_vocabulary([*train, *evaluation])
    config = experiment.lm_config(len(vocabulary), **overrides)
    training = experiment.training_config(**overrides, seed=seed)
    logger.info(
        f"Training a {config.num_layers}x{config.hidden_size} LSTM on {len(train)} sentences "
        f"({len(vocabulary)} words, seed {training.seed})"
    )
    result = train_lm(config, vocabulary, [instance.tokens for instance in train], training)

    if checkpoint is None:
        checkpoint = experiment.checkpoint or experiment.output_dir(output_dir) / "lm.ckpt"
    path = save_checkpoint(checkpoint, result.model)
    logger.success(f"File saved to {path}")

    metrics: dict[str, Any] = {
        "config": config.to_dict(),
        "training": training.to_dict(),
        "losses": list(result.losses),
        "seconds": result.seconds,
        "n_train": len(train),
    }
    if evaluation:
        metrics["n_eval"] = len(evaluation)
        metrics["perplexity"] = perplexity(result.model, [instance.tokens for instance in evaluation])
        metrics["preference_accuracy"] = agreement_accuracy(result.model, evaluation)
        logger.opt(colors=True).info(
            f"Eval perplexity <cyan>{metrics['perplexity']:.3f}</>, written form preferred in "
            f"<cyan>{100 * metrics['preference_accuracy']:.1f}%</> of instances"
        )
    metrics_path = write_json(path.with_name(f"{path.name}.metrics.json"), metrics)
    logger.success(f"File saved to {metrics_path}")
