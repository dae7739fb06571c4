import json
import math

import pytest

from ncbf.config import PROFILES, RunConfig, load_config, merge
from ncbf.errors import ConfigError, MissingArtifact
from ncbf.partition import RadialLaw


def test_defaults_describe_the_reference_setup():
    run = load_config()
    assert run.profile == "full"
    config = run.to_array_config()
    assert (config.num_elements, config.element_spacing) == (24, 0.04)
    assert config.carrier_frequency == 3.5e9
    spec = run.to_partition_spec()
    assert spec.psi_max == pytest.approx(math.radians(40))
    assert (spec.r_min, spec.r_max) == (0.5, 6.0)
    assert spec.radial_law == RadialLaw.COSINE
    assert run.num_users == 3
    assert run.model_dims() == [6, 1024, 512, 512, 256, 128, 64, 24]


def test_ci_small_profile():
    run = load_config(profile="ci-small")
    assert run.dataset.size == 20_000
    assert run.training.epochs == 100
    assert run.training.batch_size == 32
    assert run.training.decay == 0.97
    assert run.model_dims() == [6, 256, 128, 128, 64, 32, 32, 24]
    assert sorted(PROFILES) == ["ci-small", "full"]


def test_layering_order(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "profile": "ci-small",
                "dataset": {"size": 500},
                "training": {"epochs": 3},
            }
        )
    )
    run = load_config(path, overrides={"training": {"epochs": 7}})
    assert run.profile == "ci-small"
    assert run.dataset.size == 500  # file beats profile
    assert run.training.epochs == 7  # overrides beat file
    assert run.training.dims == "small"  # profile beats defaults

    # an explicit profile replaces the file's
    assert load_config(path, profile="full").training.dims == "large"


def test_every_violation_is_reported(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        json.dumps(
            {
                "array": {"num_elements": 1},
                "coverage": {"r_min": 5.0, "r_max": 1.0},
                "num_users": 1,
                "dataset": {"split": 1.5},
                "training": {"epochs": 0},
            }
        )
    )
    with pytest.raises(ConfigError) as info:
        load_config(path)
    text = "\n".join(info.value.violations)
    assert len(info.value.violations) >= 5
    for fragment in ("num_users", "split", "epochs", "r_"):
        assert fragment in text
    assert info.value.exit_code == 2


def test_unknown_fields_are_rejected():
    with pytest.raises(ConfigError) as info:
        merge(RunConfig(), {"array": {"elements": 8}, "colour": "red"})
    assert info.value.violations == [
        "unknown field array.elements",
        "unknown field colour",
    ]


def test_bad_dims():
    with pytest.raises(ConfigError):
        load_config(overrides={"training": {"dims": "huge"}})
    with pytest.raises(ConfigError):
        load_config(overrides={"training": {"dims": [16, 0]}})


def test_explicit_hidden_widths():
    run = load_config(overrides={"num_users": 2, "training": {"dims": [16, 8]}})
    assert run.model_dims() == [4, 16, 8, 24]


def test_unknown_profile():
    with pytest.raises(ConfigError):
        load_config(profile="huge")


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(MissingArtifact) as info:
        load_config(tmp_path / "absent.json")
    assert info.value.exit_code == 3


def test_effective_config_is_written(tmp_path):
    run = load_config(overrides={"dataset": {"seed": 9}})
    path = run.write(tmp_path / "work")
    assert path.name == "effective_config.json"
    written = json.loads(path.read_text())
    assert written["dataset"]["seed"] == 9
    assert written["coverage"]["psi_min_deg"] == -40.0
    assert written == run.to_dict()


def test_wrongly_typed_values_are_violations():
    with pytest.raises(ConfigError) as info:
        load_config(
            overrides={
                "array": {"num_elements": "24", "element_spacing": 4},
                "partition": {"beta_delta": None},
                "training": {"dims": [16, "8"], "epochs": 1.5},
                "num_users": True,
            }
        )
    assert info.value.exit_code == 2
    assert info.value.violations == [
        "array.num_elements must be int, got '24'",
        "training.dims must be str | list[int], got [16, '8']",
        "training.epochs must be int, got 1.5",
        "num_users must be int, got True",
    ]
