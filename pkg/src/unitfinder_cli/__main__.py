import sys
from typing import Any, NoReturn

import click

from unitfinder_cli.commands.compare_estimators import cli as compare_estimators
from unitfinder_cli.commands.evaluate import cli as evaluate
from unitfinder_cli.commands.find_units import cli as find_units
from unitfinder_cli.commands.gen_data import cli as gen_data
from unitfinder_cli.commands.report import cli as report
from unitfinder_cli.commands.robustness import cli as robustness
from unitfinder_cli.commands.trace import cli as trace
from unitfinder_cli.commands.train_lm import cli as train_lm
from unitfinder_cli.constants import EXIT_USAGE
from unitfinder_cli.errors import UnitFinderError
from unitfinder_cli.utils.logger import logger, set_verbosity


class UnitFinderGroup(click.Group):
    """
    A group that maps errors to exit codes: usage and configuration errors exit with 1, data
    errors with 2, numerical and shape errors with 3.
    """

    def main(self, *args: Any, **kwargs: Any) -> Any:  # type: ignore[override]
        if kwargs.get("standalone_mode", True) is False:
            return super().main(*args, **kwargs)
        try:
            return super().main(*args, standalone_mode=False, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except UnitFinderError as e:
            _exit_with(e)

    def invoke(self, ctx: click.Context) -> Any:
        # The return value of a subcommand is not an exit code
        super().invoke(ctx)
        return None


def _exit_with(e: UnitFinderError) -> NoReturn:
    logger.opt(colors=True).error(f"<lr>{e.__module__}.{type(e).__name__}</lr>: {e}")
    sys.exit(e.exit_code)


@click.group(
    cls=UnitFinderGroup,
    help="Find the sparse sets of hidden units that carry number and gender in an LSTM language model.",
    commands={
        "gen-data": gen_data,
        "train-lm": train_lm,
        "find-units": find_units,
        "evaluate": evaluate,
        "trace": trace,
        "compare-estimators": compare_estimators,
        "report": report,
        "robustness": robustness,
    },
    context_settings={"help_option_names": ["-h", "--help"]},
)
@click.option("-q", "--quiet", is_flag=True, help="Only show warnings and errors.")
@click.option("-v", "--verbose", is_flag=True, help="Show per-epoch progress and debug messages.")
@click.version_option()
def cli(quiet: bool, verbose: bool) -> None:  # pylint: disable=missing-function-docstring
    set_verbosity(quiet=quiet, verbose=verbose)


if __name__ == "__main__":
    cli()  # pylint: disable=no-value-for-parameter
