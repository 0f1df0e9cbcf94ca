"""
Annotated sentence instances and their tab-separated corpus files.

One instance per line, UTF-8, seven tab-separated fields::

    tokens (space-joined)  i  n  d  t  task  attribute

``i`` (intervention position) and ``n`` (target position) are 1-based token positions. Tokens after
``n`` are allowed; they are only used when training the language model.
"""

from collections.abc import Iterable
from dataclasses import dataclass, replace
from pathlib import Path

from unitfinder_cli.constants import CORPUS_COLUMNS, TASK_AGREEMENT, TASK_GENDER
from unitfinder_cli.errors import DataError
from unitfinder_cli.utils import atomic_write_text

__all__ = ["SentenceInstance", "read_corpus", "write_corpus"]


@dataclass(frozen=True)
class SentenceInstance:
    """
    A sentence annotated for one intervention.

    ``d`` is the form the model is expected to prefer and ``t`` the target form of the
    intervention. At generation time ``d`` is the form written in the sentence (the grammatical
    verb, or the sampled pronoun); :func:`unitfinder_cli.app.objective.assign_contrast` re-orders the
    pair according to a trained model.
    """

    tokens: tuple[str, ...]
    intervention_position: int
    target_position: int
    d: str
    t: str
    task: str
    attribute: str

    def __post_init__(self) -> None:
        if not 1 <= self.intervention_position < self.target_position:
            raise DataError(
                f"intervention position {self.intervention_position} must satisfy "
                f"1 <= i < n = {self.target_position}"
            )
        if self.target_position > len(self.tokens):
            raise DataError(
                f"target position {self.target_position} beyond sentence length {len(self.tokens)}"
            )
        if self.d == self.t:
            raise DataError(f"contrast pair must differ, got d = t = {self.d!r}")
        if self.task not in (TASK_AGREEMENT, TASK_GENDER):
            raise DataError(f"unknown task {self.task!r}")

    @property
    def prefix(self) -> tuple[str, ...]:
        """The input tokens x_1 ... x_{n-1}"""
        return self.tokens[: self.target_position - 1]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def swapped(self) -> "SentenceInstance":
        """The same instance with d and t exchanged"""
        return replace(self, d=self.t, t=self.d)

    def to_line(self) -> str:
        fields = (
            self.text,
            str(self.intervention_position),
            str(self.target_position),
            self.d,
            self.t,
            self.task,
            self.attribute,
        )
        return "\t".join(fields)

    @classmethod
    def from_line(cls, line: str, line_number: int = 0) -> "SentenceInstance":
        """
        Parse one corpus line.

        :raises DataError: Naming the line number and, when a field is missing or malformed, the
            column.
        """
        fields = line.rstrip("\n").split("\t")
        if len(fields) < len(CORPUS_COLUMNS):
            missing = CORPUS_COLUMNS[len(fields)]
            raise DataError(f"line {line_number}: missing column {missing!r}")
        if len(fields) > len(CORPUS_COLUMNS):
            raise DataError(
                f"line {line_number}: expected {len(CORPUS_COLUMNS)} columns, got {len(fields)}"
            )
        tokens_field, i_field, n_field, d, t, task, attribute = fields
        positions = []
        for column, value in (("i", i_field), ("n", n_field)):
            try:
                positions.append(int(value))
            except ValueError as e:
                raise DataError(
                    f"line {line_number}: column {column!r} is not an integer: {value!r}"
                ) from e
        tokens = tuple(tokens_field.split())
        if not tokens:
            raise DataError(f"line {line_number}: column 'tokens' is empty")
        try:
            return cls(tokens, positions[0], positions[1], d, t, task, attribute)
        except DataError as e:
            raise DataError(f"line {line_number}: {e}") from e


def write_corpus(path: Path, instances: Iterable[SentenceInstance]) -> Path:
    """Write instances to ``path`` atomically, one per line"""
    text = "".join(f"{instance.to_line()}\n" for instance in instances)
    atomic_write_text(path, text)
    return path


def read_corpus(path: Path) -> list[SentenceInstance]:
    """
    Read a corpus file. Blank lines are skipped; an empty file is an empty corpus.

    :raises DataError: On the first malformed line.
    """
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"Cannot read corpus {path}: {e}") from e
    return [
        SentenceInstance.from_line(line, line_number)
        for line_number, line in enumerate(lines, start=1)
        if line.strip()
    ]
