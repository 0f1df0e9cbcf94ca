"""
Experiment manifests.

A manifest is a JSON object naming the files of an experiment and the settings of every step::

    {
        "train_corpus": "data/agreement.train.tsv",
        "eval_corpus": "data/agreement.eval.tsv",
        "checkpoint": "models/lm.ckpt",
        "results_dir": "results",
        "task": "agreement",
        "mode": "single",
        "direction": "to-plural",
        "seed": 0,
        "data": {"n_train": 11000, "n_eval": 1000, "template": "pp"},
        "lm": {"hidden_size": 64, "epochs": 30},
        "search": {"alpha": 0.05, "kl_weight": 1.0},
        "lm_seeds": [0, 1, 2],
        "repeats": 3
    }

Every key is optional. Without a ``direction`` the search commands use the task's first direction
(``to-plural`` or ``to-she``), and ``find-units`` searches each of the task's directions in turn.
Relative paths are resolved against the manifest's directory. A value
given on the command line overrides the manifest, which overrides the built-in default.
"""

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from unitfinder_cli.app.search import SearchConfig
from unitfinder_cli.constants import TASK_AGREEMENT, TASK_DIRECTIONS, TASK_GENDER
from unitfinder_cli.core.lstm_lm import LMConfig, TrainingConfig
from unitfinder_cli.errors import ConfigError, DataError
from unitfinder_cli.lib.datagen import AgreementConfig, GenderConfig
from unitfinder_cli.utils import atomic_write_text, drop_none

__all__ = ["ExperimentManifest", "load_manifest"]

_PATH_KEYS = ("train_corpus", "eval_corpus", "checkpoint", "results_dir")


def _field_names(cls: type) -> set[str]:
    return {f.name for f in fields(cls)}


def _check_keys(section: str, values: dict[str, Any], *groups: type) -> None:
    known = set().union(*(_field_names(group) for group in groups)) - {"lexicon"}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown {section} option(s): {', '.join(sorted(unknown))}")


def _pick(values: dict[str, Any], group: type) -> dict[str, Any]:
    """The entries of ``values`` that name a field of ``group``"""
    names = _field_names(group)
    return {key: value for key, value in values.items() if key in names}


@dataclass
class ExperimentManifest:
    """The resolved contents of a manifest file (or the defaults when there is none)."""

    train_corpus: Optional[Path] = None
    eval_corpus: Optional[Path] = None
    checkpoint: Optional[Path] = None
    results_dir: Optional[Path] = None
    task: str = TASK_AGREEMENT
    mode: Optional[str] = None
    direction: Optional[str] = None
    seed: Optional[int] = None
    data: dict[str, Any] = field(default_factory=dict)
    lm: dict[str, Any] = field(default_factory=dict)
    search: dict[str, Any] = field(default_factory=dict)
    lm_seeds: list[int] = field(default_factory=lambda: [0])
    repeats: int = 1
    source: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.task not in (TASK_AGREEMENT, TASK_GENDER):
            raise ConfigError(f"unknown task {self.task!r}")
        if self.repeats < 1:
            raise ConfigError("repeats must be at least 1")
        if not self.lm_seeds:
            raise ConfigError("lm_seeds must name at least one seed")
        if self.seed is not None and self.seed < 0:
            raise ConfigError("seed must be non-negative")
        _check_keys("data", self.data, AgreementConfig, GenderConfig)
        _check_keys("lm", self.lm, LMConfig, TrainingConfig)
        _check_keys("search", self.search, SearchConfig)
        if "vocab_size" in self.lm:
            raise ConfigError("vocab_size is derived from the training corpus")

    @classmethod
    def from_dict(cls, values: dict[str, Any], base_dir: Optional[Path] = None) -> "ExperimentManifest":
        """
        :raises ConfigError: On unknown keys or invalid values.
        """
        names = _field_names(cls) - {"source"}
        unknown = set(values) - names
        if unknown:
            raise ConfigError(f"unknown manifest key(s): {', '.join(sorted(unknown))}")
        resolved = dict(values)
        for key in _PATH_KEYS:
            if resolved.get(key) is not None:
                path = Path(resolved[key])
                resolved[key] = path if path.is_absolute() or base_dir is None else base_dir / path
        try:
            return cls(**resolved)
        except TypeError as e:
            raise ConfigError(f"invalid manifest: {e}") from e

    def to_dict(self) -> dict[str, Any]:
        values = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "source"}
        for key in _PATH_KEYS:
            if values[key] is not None:
                values[key] = str(values[key])
        return values

    def save(self, path: Path) -> Path:
        return atomic_write_text(path, json.dumps(self.to_dict(), indent=4, sort_keys=True) + "\n")

    def path(self, key: str, override: Optional[Path] = None) -> Path:
        """
        The flag value for a path, else the manifest's.

        :raises ConfigError: If neither is given.
        """
        value = override if override is not None else getattr(self, key)
        if value is None:
            raise ConfigError(f"no {key.replace('_', ' ')} given on the command line or in the manifest")
        return Path(value)

    def output_dir(self, override: Optional[Path] = None) -> Path:
        """``--out``, else the manifest's ``results_dir``, else the current directory"""
        if override is not None:
            return override
        return self.results_dir if self.results_dir is not None else Path.cwd()

    def resolved_seed(self, override: Optional[int] = None) -> int:
        if override is not None:
            return override
        return self.seed if self.seed is not None else 0

    def agreement_config(self, **overrides: Any) -> AgreementConfig:
        return AgreementConfig(**{**_pick(self.data, AgreementConfig), **drop_none(overrides)})

    def gender_config(self, **overrides: Any) -> GenderConfig:
        return GenderConfig(**{**_pick(self.data, GenderConfig), **drop_none(overrides)})

    def lm_options(self, **overrides: Any) -> dict[str, Any]:
        """The model sizes, everything but the vocabulary size"""
        return {**_pick(self.lm, LMConfig), **_pick(drop_none(overrides), LMConfig)}

    def lm_config(self, vocab_size: int, **overrides: Any) -> LMConfig:
        return LMConfig(vocab_size=vocab_size, **self.lm_options(**overrides))

    def training_config(self, **overrides: Any) -> TrainingConfig:
        values = {**_pick(self.lm, TrainingConfig), **_pick(drop_none(overrides), TrainingConfig)}
        if "seed" not in values:
            values["seed"] = self.resolved_seed()
        return TrainingConfig(**values)

    def search_config(self, **overrides: Any) -> SearchConfig:
        """
        Defaults, then the manifest's ``search`` section and its top-level ``mode``, ``direction``
        and ``seed``, then the given overrides (``None`` values are ignored). Without a direction
        anywhere, the task's first direction is used.
        """
        top_level = drop_none({"mode": self.mode, "direction": self.direction, "seed": self.seed})
        values = {**top_level, **self.search, **_pick(drop_none(overrides), SearchConfig)}
        values.setdefault("direction", TASK_DIRECTIONS[self.task][0])
        return SearchConfig(**values)

    def directions(self, override: Optional[str] = None) -> tuple[str, ...]:
        """The direction given on the command line or in the manifest, else all of the task's"""
        given = override or self.search.get("direction") or self.direction
        return (given,) if given else TASK_DIRECTIONS[self.task]


def load_manifest(path: Optional[Path]) -> ExperimentManifest:
    """
    Read a manifest; ``None`` gives the defaults.

    :raises DataError: If the file cannot be read or is not a JSON object.
    :raises ConfigError: If a key or a value is invalid.
    """
    if path is None:
        return ExperimentManifest()
    try:
        with path.open(encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"Error reading the manifest {path}: {e}") from e
    if not isinstance(data, dict):
        raise DataError(f"{path}: a manifest must be a JSON object")
    manifest = ExperimentManifest.from_dict(data, base_dir=path.parent)
    manifest.source = path
    return manifest
