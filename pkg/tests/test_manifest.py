import json
from pathlib import Path

import pytest

from unitfinder_cli.errors import ConfigError, DataError
from unitfinder_cli.lib.manifest import ExperimentManifest, load_manifest


def _write(tmp_path: Path, values) -> Path:
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(values), encoding="utf-8")
    return path


def test_no_manifest_gives_defaults():
    manifest = load_manifest(None)
    assert manifest.search_config().alpha == 0.05
    assert manifest.resolved_seed() == 0
    assert manifest.output_dir() == Path.cwd()
    with pytest.raises(ConfigError, match="no checkpoint given"):
        manifest.path("checkpoint")


def test_command_line_beats_manifest_beats_defaults(tmp_path):
    manifest = load_manifest(
        _write(tmp_path, {"seed": 4, "mode": "every", "search": {"alpha": 0.1, "kl_weight": 0.5}})
    )
    config = manifest.search_config(alpha=0.2, kl_weight=None)
    assert config.alpha == 0.2
    assert config.kl_weight == 0.5
    assert config.mode == "every"
    assert config.seed == 4
    assert config.beta == 0.5
    assert manifest.resolved_seed(9) == 9


@pytest.mark.parametrize(
    "task, default, every",
    [
        ("agreement", "to-plural", ("to-plural", "to-singular")),
        ("gender", "to-she", ("to-she", "to-he")),
    ],
)
def test_directions_default_to_the_task(task, default, every):
    manifest = ExperimentManifest(task=task)
    assert manifest.search_config().direction == default
    assert manifest.directions() == every
    assert manifest.directions("any") == ("any",)
    assert manifest.search_config(direction="any").direction == "any"


def test_manifest_direction_is_the_only_one(tmp_path):
    manifest = load_manifest(_write(tmp_path, {"direction": "to-singular"}))
    assert manifest.directions() == ("to-singular",)
    assert manifest.search_config().direction == "to-singular"
    assert manifest.directions("to-plural") == ("to-plural",)


def test_relative_paths_follow_the_manifest(tmp_path):
    manifest = load_manifest(
        _write(tmp_path, {"checkpoint": "models/lm.ckpt", "results_dir": "/abs/results"})
    )
    assert manifest.path("checkpoint") == tmp_path / "models" / "lm.ckpt"
    assert manifest.output_dir() == Path("/abs/results")
    assert manifest.path("checkpoint", tmp_path / "other.ckpt") == tmp_path / "other.ckpt"
    assert manifest.source == tmp_path / "experiment.json"


def test_lm_and_training_sections(tmp_path):
    manifest = load_manifest(_write(tmp_path, {"seed": 3, "lm": {"hidden_size": 16, "epochs": 2}}))
    assert manifest.lm_config(vocab_size=20).hidden_size == 16
    assert manifest.lm_config(vocab_size=20, hidden_size=32).hidden_size == 32
    assert manifest.lm_options() == {"hidden_size": 16}
    training = manifest.training_config()
    assert (training.epochs, training.seed) == (2, 3)


def test_data_section(tmp_path):
    manifest = load_manifest(_write(tmp_path, {"data": {"n_eval": 50, "template": "simple"}}))
    assert manifest.agreement_config().n_eval == 50
    assert manifest.agreement_config(n_eval=10).n_eval == 10
    assert manifest.gender_config().n_eval == 50


@pytest.mark.parametrize(
    "values, message",
    [
        ({"alpha": 0.1}, "unknown manifest key"),
        ({"search": {"gamma": 1}}, "unknown search option"),
        ({"lm": {"vocab_size": 10}}, "derived from the training corpus"),
        ({"task": "parsing"}, "unknown task"),
        ({"repeats": 0}, "repeats"),
    ],
)
def test_invalid_manifests(tmp_path, values, message):
    with pytest.raises(ConfigError, match=message):
        load_manifest(_write(tmp_path, values))


def test_invalid_values_surface_when_used(tmp_path):
    manifest = load_manifest(_write(tmp_path, {"search": {"alpha": 3.0}}))
    with pytest.raises(ConfigError, match="alpha"):
        manifest.search_config()


def test_unreadable_manifests(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(DataError):
        load_manifest(path)
    with pytest.raises(DataError, match="JSON object"):
        load_manifest(_write(tmp_path, [1, 2]))


def test_save_and_reload(tmp_path):
    manifest = ExperimentManifest(checkpoint=tmp_path / "lm.ckpt", repeats=3, search={"alpha": 0.1})
    reloaded = load_manifest(manifest.save(tmp_path / "saved.json"))
    assert reloaded.checkpoint == tmp_path / "lm.ckpt"
    assert reloaded.repeats == 3 and reloaded.search == {"alpha": 0.1}
