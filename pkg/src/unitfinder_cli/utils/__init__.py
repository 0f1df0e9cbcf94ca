import csv
import io
import os
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Callable, Optional

import click
from pathvalidate import sanitize_filename

from unitfinder_cli.constants import DIRECTION_ANY, DIRECTIONS, MODE_EVERY, MODE_SINGLE


class BaseCommand(click.Command):
    """
    Base command for all commands in the CLI.
    """

    def __init__(self, *args, **kwargs) -> None:  # type: ignore[no-untyped-def]
        shared_options = [
            click.Option(
                ["-m", "--manifest"],
                type=click.Path(exists=True, dir_okay=False, resolve_path=True, path_type=Path),
                help="""
                A JSON experiment manifest.

                Values given on the command line override the manifest, which overrides the
                built-in defaults.
                """,
            ),
            click.Option(
                ["-s", "--seed"],
                type=click.IntRange(min=0),
                help="""
                The seed of every random stream used by the command.

                Defaults to ``0`` when neither the command line nor the manifest sets it.
                """,
            ),
            click.Option(
                ["-o", "--out", "output_dir"],
                type=click.Path(path_type=Path, file_okay=False, writable=True),
                callback=output_dir_callback,
                help="""
                The directory where output files are to be saved.

                If not specified, the manifest's ``results_dir`` is used, then the current
                directory.

                If the output directory doesn't exist, it will be created, as well as any missing
                parent directories.
                """,
            ),
        ]
        kwargs.setdefault("params", []).extend(shared_options)
        kwargs.setdefault("context_settings", {"help_option_names": ["-h", "--help"]})
        super().__init__(*args, **kwargs)


def make_options(options: list[Callable]) -> Callable:
    """
    Add options to a click command.

    :param options: A list of click options
    :type options: list[Callable]
    :return: A decorator that adds the options to a click command
    :rtype: Callable
    """

    def _add_options(func: Callable) -> Callable:
        for option in reversed(options):
            func = option(func)
        return func

    return _add_options


def search_options(runner: bool = True) -> Callable:
    """
    The flags shared by the commands that run a unit search.

    All of them default to ``None`` so that an unset flag never hides a manifest value. With
    ``runner`` off, the repeat and worker flags are left out.
    """
    options = [
        click.option(
            "--mode",
            type=click.Choice([MODE_SINGLE, MODE_EVERY]),
            help="Intervene at the subject/occupation step only, or at every step before the target.",
        ),
        click.option(
            "--direction",
            type=click.Choice([DIRECTION_ANY, *DIRECTIONS]),
            help="""
            The task direction. ``to-plural`` keeps the instances whose target form is plural, and
            so on; ``any`` keeps every instance under one shared mask. Defaults to the task's
            first direction (``find-units``: each of the task's directions).
            """,
        ),
        click.option(
            "--alpha",
            type=click.FloatRange(min=0.0, min_open=True, max=1.0),
            help="Sparsity budget, as a fraction of the hidden units.",
        ),
        click.option(
            "--beta",
            type=click.FloatRange(min=0.0, min_open=True, max=1.0),
            help="Budget on the expected number of mask entries strictly between 0 and 1.",
        ),
        click.option(
            "--kl-weight",
            type=click.FloatRange(min=0.0),
            help="Weight of the retention term (mean KL divergence to the original model).",
        ),
        click.option(
            "--epochs",
            type=click.IntRange(min=1),
            help="Maximum number of passes over the training instances.",
        ),
    ]
    runner_options = [
        click.option(
            "--repeats",
            type=click.IntRange(min=1),
            help="Number of independent searches, each with its own seed.",
        ),
        click.option(
            "--workers",
            type=click.IntRange(min=1),
            default=1,
            show_default=True,
            help="Number of worker processes used to run repeats in parallel.",
        ),
    ]
    return make_options(options + runner_options if runner else options)


def output_dir_callback(
    ctx: click.Context, _: click.Parameter, value: Optional[Path]
) -> Optional[Path]:
    """
    Callback for ``--out`` option.

    Tries to create the output directory if it doesn't exist. Checks if the output directory is
    writable. Returns a Path object. If the callback fails, raises a click.BadParameter exception.

    :param ctx: click Context
    :type ctx: click.Context
    :param _: click Parameter
    :type _: click.Parameter
    :param value: The value to convert
    :type value: Optional[Path]
    :return: The converted value
    :rtype: Optional[Path]
    """

    if not value or ctx.resilient_parsing:
        return None
    try:
        value.mkdir(parents=True, exist_ok=True)
    except Exception as e:
        raise click.BadParameter(f"Could not create output directory: {e}") from e
    if not os.access(value, os.W_OK):
        raise click.BadParameter(f"Output directory is not writable: {value}")
    return value


def safe_stem(name: str) -> str:
    """A file stem safe on every platform, derived from a run identifier"""
    return sanitize_filename(name, replacement_text="_") or "run"


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """
    Write ``data`` to a temporary sibling of ``path`` and move it into place.

    An interrupted write leaves ``path`` untouched.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_name(f".{path.name}.tmp")
    try:
        temp_path.write_bytes(data)
        temp_path.replace(path)
    finally:
        if temp_path.exists():
            temp_path.unlink()
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def drop_none(values: dict[str, Any]) -> dict[str, Any]:
    """The entries of ``values`` that were actually set"""
    return {key: value for key, value in values.items() if value is not None}


def write_tsv(path: Path, rows: Sequence[dict[str, Any]], columns: Sequence[str]) -> Path:
    """Write ``rows`` as a tab-separated file with a header line"""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(columns), delimiter="\t", lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return atomic_write_text(path, buffer.getvalue())
