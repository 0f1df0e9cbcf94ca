"""
Versioned model checkpoints.

A checkpoint is a UTF-8 text header followed by a binary blob::

    UFCKPT 1
    config {"embedding_size": 64, "hidden_size": 64, ...}
    vocab 183
    <unk>
    <eos>
    ...                      one token per line
    arrays 9
    embedding 183,64
    layer0.weight_ih 64,256
    ...                      name and comma-separated shape, in blob order
    sha256 <hex digest of the blob>
    data
    <little-endian float64 values of every array, row-major, concatenated>

Loading validates the magic and version, the blob length and digest, and the array shapes against
the config, and only then builds the model.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

from unitfinder_cli.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from unitfinder_cli.core.lstm_lm import LanguageModel, LMConfig, LMParameters, Vocabulary
from unitfinder_cli.errors import ConfigError, DataError
from unitfinder_cli.utils import atomic_write_bytes

__all__ = ["load_checkpoint", "save_checkpoint"]

_LITTLE_ENDIAN_F8 = np.dtype("<f8")


def save_checkpoint(path: Path, model: LanguageModel) -> Path:
    """Write ``model`` to ``path`` atomically"""
    names = list(model.config.shapes())
    blob = b"".join(
        np.ascontiguousarray(model.params[name], dtype=_LITTLE_ENDIAN_F8).tobytes() for name in names
    )
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"config {json.dumps(model.config.to_dict(), sort_keys=True)}",
        f"vocab {len(model.vocabulary)}",
        *model.vocabulary.tokens,
        f"arrays {len(names)}",
        *(f"{name} {','.join(str(d) for d in model.params[name].shape)}" for name in names),
        f"sha256 {hashlib.sha256(blob).hexdigest()}",
        "data",
    ]
    header = ("\n".join(lines) + "\n").encode("utf-8")
    return atomic_write_bytes(path, header + blob)


class _HeaderReader:
    def __init__(self, data: bytes, path: Path) -> None:
        self.data = data
        self.offset = 0
        self.path = path

    def line(self) -> str:
        end = self.data.find(b"\n", self.offset)
        if end < 0:
            raise DataError(f"{self.path}: truncated checkpoint header")
        try:
            text = self.data[self.offset : end].decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError(f"{self.path}: corrupted checkpoint header") from e
        self.offset = end + 1
        return text

    def keyed(self, key: str) -> str:
        text = self.line()
        found, _, value = text.partition(" ")
        if found != key:
            raise DataError(f"{self.path}: corrupted checkpoint header, expected {key!r} line")
        return value

    def count(self, key: str) -> int:
        value = self.keyed(key)
        try:
            return int(value)
        except ValueError as e:
            raise DataError(f"{self.path}: corrupted checkpoint header, bad {key} count") from e


def load_checkpoint(path: Path) -> LanguageModel:
    """
    Read a checkpoint written by :func:`save_checkpoint`.

    :raises DataError: If the file is not a checkpoint, has another format version, is truncated
        or its data does not match the recorded digest.
    :raises ShapeMismatchError: If an array does not have the shape implied by the config.
    """
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DataError(f"Cannot read checkpoint {path}: {e}") from e

    reader = _HeaderReader(data, path)
    magic, _, version = reader.line().partition(" ")
    if magic != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint (corrupted header)")
    if version != str(CHECKPOINT_VERSION):
        raise DataError(
            f"{path}: checkpoint format version {version!r}, expected {CHECKPOINT_VERSION}"
        )
    try:
        config = LMConfig(**json.loads(reader.keyed("config")))
    except (json.JSONDecodeError, TypeError, ConfigError) as e:
        raise DataError(f"{path}: invalid config in checkpoint header: {e}") from e
    tokens = tuple(reader.line() for _ in range(reader.count("vocab")))
    shapes = []
    for _ in range(reader.count("arrays")):
        name, _, shape = reader.line().partition(" ")
        try:
            shapes.append((name, tuple(int(d) for d in shape.split(",") if d)))
        except ValueError as e:
            raise DataError(f"{path}: corrupted shape for array {name!r}") from e
    digest = reader.keyed("sha256")
    if reader.line() != "data":
        raise DataError(f"{path}: corrupted checkpoint header, expected data marker")

    blob = data[reader.offset :]
    expected = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in shapes) * _LITTLE_ENDIAN_F8.itemsize
    if len(blob) != expected:
        raise DataError(f"{path}: truncated checkpoint, {len(blob)} of {expected} data bytes")
    if hashlib.sha256(blob).hexdigest() != digest:
        raise DataError(f"{path}: checkpoint data does not match its digest")

    arrays = {}
    offset = 0
    for name, shape in shapes:
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(blob, dtype=_LITTLE_ENDIAN_F8, count=count, offset=offset)
        arrays[name] = values.astype(np.float64).reshape(shape)
        offset += count * _LITTLE_ENDIAN_F8.itemsize

    return LanguageModel(config, LMParameters(arrays), Vocabulary(tokens))
