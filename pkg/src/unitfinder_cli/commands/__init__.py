# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Optional

import click

from unitfinder_cli.constants import ESTIMATOR_HARD_CONCRETE, ESTIMATOR_REINFORCE
from unitfinder_cli.utils import make_options

if TYPE_CHECKING:
    from unitfinder_cli.core.lstm_lm import LanguageModel
    from unitfinder_cli.lib.manifest import ExperimentManifest


def _existing_file() -> click.Path:
    return click.Path(exists=True, dir_okay=False, resolve_path=True, path_type=Path)


def checkpoint_option(help_text: str = "The model checkpoint to read.") -> Callable:
    """
    Add the ``-c/--checkpoint`` option to a click command.

    :return: A decorator that adds the option to a click command
    :rtype: Callable
    """
    return make_options(
        [click.option("-c", "--checkpoint", type=_existing_file(), help=help_text)]
    )


def corpus_options(train: bool = True, evaluation: bool = True) -> Callable:
    """
    Add the ``--train-corpus`` and ``--eval-corpus`` options to a click command.

    Both default to the manifest's ``train_corpus`` and ``eval_corpus``.
    """
    options = []
    if train:
        options.append(
            click.option(
                "--train-corpus",
                type=_existing_file(),
                help="The corpus the masks (or the model) are trained on.",
            )
        )
    if evaluation:
        options.append(
            click.option(
                "--eval-corpus",
                type=_existing_file(),
                help="The corpus used for evaluation.",
            )
        )
    return make_options(options)


def results_option(required: bool = False) -> Callable:
    return make_options(
        [
            click.option(
                "-r",
                "--results",
                type=_existing_file(),
                required=required,
                help="A JSON-lines file of search results written by ``find-units``.",
            )
        ]
    )


def estimator_option() -> Callable:
    return make_options(
        [
            click.option(
                "--estimator",
                type=click.Choice([ESTIMATOR_HARD_CONCRETE, ESTIMATOR_REINFORCE]),
                help="""
                How the mask gradient is estimated: reparameterized Hard Concrete samples
                (default) or the score function of Bernoulli masks.
                """,
            )
        ]
    )


def lm_options() -> Callable:
    """The language model sizes and training settings; every flag defaults to ``None``"""
    options = [
        click.option("--layers", "num_layers", type=click.IntRange(min=1), help="Number of LSTM layers."),
        click.option("--hidden-size", type=click.IntRange(min=8), help="Hidden units per layer."),
        click.option("--embedding-size", type=click.IntRange(min=1), help="Size of the word embeddings."),
        click.option(
            "--lm-epochs",
            "lm_epochs",
            type=click.IntRange(min=1),
            help="Passes over the training sentences.",
        ),
        click.option("--batch-size", type=click.IntRange(min=1), help="Sentences per SGD step."),
        click.option(
            "--learning-rate",
            type=click.FloatRange(min=0.0),
            help="SGD learning rate of the language model.",
        ),
    ]
    return make_options(options)


def lm_overrides(
    num_layers: Optional[int] = None,
    hidden_size: Optional[int] = None,
    embedding_size: Optional[int] = None,
    lm_epochs: Optional[int] = None,
    batch_size: Optional[int] = None,
    learning_rate: Optional[float] = None,
) -> dict[str, Optional[object]]:
    """Map the :func:`lm_options` flags onto ``LMConfig`` and ``TrainingConfig`` field names"""
    return {
        "num_layers": num_layers,
        "hidden_size": hidden_size,
        "embedding_size": embedding_size,
        "epochs": lm_epochs,
        "batch_size": batch_size,
        "learning_rate": learning_rate,
    }


def load_corpus(manifest: "ExperimentManifest", key: str, override: Optional[Path]) -> list:
    """
    Read the corpus named by a flag, else by the manifest.

    :raises ConfigError: If neither names one.
    :raises DataError: If the file cannot be parsed.
    """
    from unitfinder_cli.lib.corpus import read_corpus
    from unitfinder_cli.utils.logger import logger

    path = manifest.path(key, override)
    instances = read_corpus(path)
    logger.info(f"Read {len(instances)} instances from {path}")
    return instances


def load_model(manifest: "ExperimentManifest", override: Optional[Path]) -> "LanguageModel":
    """
    Read the checkpoint named by a flag, else by the manifest.

    :raises DataError: If the checkpoint cannot be used.
    """
    from unitfinder_cli.lib.checkpoint import load_checkpoint
    from unitfinder_cli.utils.logger import logger

    path = manifest.path("checkpoint", override)
    model = load_checkpoint(path)
    logger.info(
        f"Loaded {model.config.num_layers}x{model.config.hidden_size} model "
        f"({len(model.vocabulary)} words) from {path}"
    )
    return model
