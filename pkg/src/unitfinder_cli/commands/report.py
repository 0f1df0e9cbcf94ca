# pylint: disable=import-outside-toplevel
from pathlib import Path
from typing import Optional

import click

from unitfinder_cli.utils import BaseCommand, safe_stem
from unitfinder_cli.utils.logger import logger


@click.command(cls=BaseCommand)
@click.argument(
    "files",
    nargs=-1,
    required=True,
    type=click.Path(exists=True, dir_okay=False, resolve_path=True, path_type=Path),
)
@click.option(
    "-l",
    "--label",
    default="report",
    show_default=True,
    help="Prefix of the prevalence and aggregate files.",
)
@click.option(
    "--limit",
    type=click.IntRange(min=1),
    help="Show only the most prevalent units.",
)
def cli(
    manifest: Optional[Path],  # pylint: disable=unused-argument
    seed: Optional[int],  # pylint: disable=unused-argument
    output_dir: Optional[Path],
    files: tuple[Path, ...],
    label: str,
    limit: Optional[int],
) -> None:
    """
    Summarizes result files written by ``find-units``, ``robustness`` or ``compare-estimators``.

    Search results from every file are pooled into one aggregate, written to
    ``<label>.prevalence.tsv`` and ``<label>.aggregate.json``; estimator comparisons are shown as
    a table.
    """
    from unitfinder_cli.app.report import (
        PREVALENCE_COLUMNS,
        comparison_table,
        prevalence_rows,
        prevalence_table,
        print_tables,
        runs_table,
        summary_table,
    )
    from unitfinder_cli.app.search import SearchResult, aggregate_runs
    from unitfinder_cli.app.studies import ComparisonRow
    from unitfinder_cli.errors import DataError
    from unitfinder_cli.lib.manifest import load_manifest
    from unitfinder_cli.lib.results import read_records, write_json
    from unitfinder_cli.utils import write_tsv

    results: list[SearchResult] = []
    comparisons: list[ComparisonRow] = []
    for file in files:
        for record in read_records(file):
            if "units" in record:
                results.append(SearchResult.from_record(record))
            elif "trial" in record:
                try:
                    comparisons.append(ComparisonRow(**record))
                except TypeError as e:
                    raise DataError(f"{file}: invalid comparison record ({e})") from e
    if not results and not comparisons:
        raise DataError("no search results or comparisons in the given files")

    tables = []
    if comparisons:
        tables.append(comparison_table(comparisons))
    if results:
        aggregate = aggregate_runs(results)
        tables = [runs_table(results), prevalence_table(aggregate, limit), summary_table(aggregate), *tables]
        out = load_manifest(manifest).output_dir(output_dir)
        stem = safe_stem(label)
        for path in (
            write_tsv(out / f"{stem}.prevalence.tsv", prevalence_rows(aggregate), PREVALENCE_COLUMNS),
            write_json(out / f"{stem}.aggregate.json", aggregate.to_record()),
        ):
            logger.success(f"File saved to {path}")
    print_tables(*tables)
