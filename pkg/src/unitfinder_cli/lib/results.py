"""JSON-lines files of search results, one record per line with sorted keys."""

import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from unitfinder_cli.app.search import SearchResult
from unitfinder_cli.errors import DataError
from unitfinder_cli.utils import atomic_write_text

__all__ = ["read_records", "read_results", "strip_timing", "write_json", "write_records"]

# Fields that depend on the machine and not on the inputs
TIMING_FIELDS = frozenset({"seconds"})


def _dumps(record: dict[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, allow_nan=False)


def write_records(path: Path, records: Iterable[dict[str, Any]]) -> Path:
    """Write ``records`` to ``path`` atomically, one JSON object per line"""
    return atomic_write_text(path, "".join(_dumps(record) + "\n" for record in records))


def write_json(path: Path, data: dict[str, Any]) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=4, sort_keys=True, allow_nan=False) + "\n")


def read_records(path: Path) -> list[dict[str, Any]]:
    """
    :raises DataError: If the file cannot be read or a line is not a JSON object.
    """
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"Cannot read results {path}: {e}") from e
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}, line {number}: invalid JSON ({e.msg})") from e
        if not isinstance(record, dict):
            raise DataError(f"{path}, line {number}: expected a JSON object")
        records.append(record)
    return records


def read_results(path: Path) -> list[SearchResult]:
    """Search results stored by ``find-units``; records of other kinds are skipped"""
    return [SearchResult.from_record(record) for record in read_records(path) if "units" in record]


def strip_timing(record: dict[str, Any]) -> dict[str, Any]:
    """``record`` without its wall-clock fields, for comparing reruns"""
    return {key: value for key, value in record.items() if key not in TIMING_FIELDS}
