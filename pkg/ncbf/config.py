"""Run configuration.

A JSON config file mirrors RunConfig section by section, in human units
(degrees, hertz, meters)::

    {
      "array": {"num_elements": 24, "element_spacing": 0.04,
                "carrier_frequency": 3.5e9},
      "coverage": {"r_min": 0.5, "r_max": 6.0,
                   "psi_min_deg": -40, "psi_max_deg": 40},
      "partition": {"correlation_target": 0.7, "beta_delta": null,
                    "radial_law": "cosine"},
      "num_users": 3,
      "dataset": {"size": 100000, "split": 0.8, "seed": 0},
      "training": {"dims": "large", "epochs": 200, "batch_size": 1000,
                   "learning_rate": 0.001, "decay": 0.97, "seed": 0}
    }

Every field is optional. Values are layered defaults < profile < file <
command-line overrides, and all violations are reported together.
"""

import json
import math
import types
import typing
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ncbf.array import ArrayConfig
from ncbf.errors import ConfigError, MissingArtifact
from ncbf.partition import PartitionSpec, RadialLaw


@dataclass(frozen=True)
class ArraySection:
    num_elements: int = 24
    element_spacing: float = 0.04
    carrier_frequency: float = 3.5e9


@dataclass(frozen=True)
class CoverageSection:
    r_min: float = 0.5
    r_max: float = 6.0
    psi_min_deg: float = -40.0
    psi_max_deg: float = 40.0


@dataclass(frozen=True)
class PartitionSection:
    correlation_target: float = 0.7
    beta_delta: float | None = None
    radial_law: str = "cosine"


@dataclass(frozen=True)
class DatasetSection:
    size: int = 100_000
    split: float = 0.8
    seed: int = 0


@dataclass(frozen=True)
class TrainingSection:
    dims: str | list[int] = "large"  # "large", "small" or explicit hidden widths
    epochs: int = 200
    batch_size: int = 1000
    learning_rate: float = 1e-3
    decay: float = 0.97
    seed: int = 0


PROFILES = {
    "full": {},
    "ci-small": {
        "dataset": {"size": 20_000},
        "training": {"dims": "small", "epochs": 100, "batch_size": 32},
    },
}

SECTIONS = {
    "array": ArraySection,
    "coverage": CoverageSection,
    "partition": PartitionSection,
    "dataset": DatasetSection,
    "training": TrainingSection,
}


@dataclass(frozen=True)
class RunConfig:
    array: ArraySection = field(default_factory=ArraySection)
    coverage: CoverageSection = field(default_factory=CoverageSection)
    partition: PartitionSection = field(default_factory=PartitionSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    num_users: int = 3
    profile: str = "full"

    def type_violations(self) -> list[str]:
        found = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in SECTIONS:
                found += [
                    f"{f.name}.{g.name} must be {_type_name(g.type)}, got "
                    f"{getattr(value, g.name)!r}"
                    for g in fields(value)
                    if not _type_ok(getattr(value, g.name), g.type)
                ]
            elif not _type_ok(value, f.type):
                found.append(f"{f.name} must be {_type_name(f.type)}, got {value!r}")
        return found

    def violations(self) -> list[str]:
        # range checks below assume well-typed fields
        found = self.type_violations()
        if found:
            return found
        if self.profile not in PROFILES:
            found.append(
                f"profile must be one of {sorted(PROFILES)}, got {self.profile!r}"
            )
        if self.num_users < 2:
            found.append(f"num_users must be >= 2, got {self.num_users}")
        found += _collect(self.to_array_config)
        found += _collect(self.to_partition_spec)
        if self.partition.radial_law not in set(RadialLaw):
            found.append(
                f"radial_law must be one of {[str(x) for x in RadialLaw]}, got "
                f"{self.partition.radial_law!r}"
            )
        if self.dataset.size < 1:
            found.append(f"dataset size must be >= 1, got {self.dataset.size}")
        if not 0 < self.dataset.split < 1:
            found.append(f"dataset split must lie in (0, 1), got {self.dataset.split}")
        if self.dataset.seed < 0 or self.training.seed < 0:
            found.append("seeds must be non-negative")
        t = self.training
        if isinstance(t.dims, str):
            if t.dims not in ("large", "small"):
                found.append(f"training dims must be 'large', 'small' or a list, got "
                             f"{t.dims!r}")
        elif not t.dims or any(int(d) < 1 for d in t.dims):
            found.append(f"training dims must be positive widths, got {t.dims}")
        if t.epochs < 1:
            found.append(f"epochs must be >= 1, got {t.epochs}")
        if t.batch_size < 1:
            found.append(f"batch_size must be >= 1, got {t.batch_size}")
        if t.learning_rate < 0:
            found.append(f"learning_rate must be >= 0, got {t.learning_rate}")
        if not 0 < t.decay <= 1:
            found.append(f"decay must lie in (0, 1], got {t.decay}")
        return found

    def validate(self) -> "RunConfig":
        violations = self.violations()
        if violations:
            raise ConfigError(violations)
        return self

    def to_array_config(self) -> ArrayConfig:
        a = self.array
        return ArrayConfig(a.num_elements, a.element_spacing, a.carrier_frequency)

    def to_partition_spec(self) -> PartitionSpec:
        c, p = self.coverage, self.partition
        law = p.radial_law if p.radial_law in set(RadialLaw) else RadialLaw.COSINE
        return PartitionSpec(
            r_min=c.r_min,
            r_max=c.r_max,
            psi_min=math.radians(c.psi_min_deg),
            psi_max=math.radians(c.psi_max_deg),
            correlation_target=p.correlation_target,
            beta_delta=p.beta_delta,
            radial_law=RadialLaw(law),
        )

    def model_dims(self) -> list[int]:
        from ncbf.estimator.mlp import large_dims, small_dims

        k, n = self.num_users, self.array.num_elements
        dims = self.training.dims
        if dims == "large":
            return large_dims(k, n)
        if dims == "small":
            return small_dims(k, n)
        return [2 * k, *(int(d) for d in dims), n]

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "effective_config.json"
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n")
        return path


def _type_ok(value, annotation) -> bool:
    if isinstance(annotation, types.UnionType):
        return any(_type_ok(value, a) for a in typing.get_args(annotation))
    if annotation is type(None):
        return value is None
    if isinstance(value, bool):
        return annotation is bool
    if annotation is float:
        return isinstance(value, (int, float))
    if typing.get_origin(annotation) is list:
        (item,) = typing.get_args(annotation)
        return isinstance(value, list) and all(_type_ok(v, item) for v in value)
    return isinstance(value, annotation)


def _type_name(annotation) -> str:
    if isinstance(annotation, type):
        return annotation.__name__
    return str(annotation)


def _collect(factory) -> list[str]:
    try:
        factory()
    except ConfigError as e:
        return e.violations
    return []


def merge(config: RunConfig, data: dict) -> RunConfig:
    """Apply a (possibly partial) nested dict on top of `config`.

    Unknown keys are collected as violations rather than ignored.
    """
    unknown = []
    changes = {}
    for key, value in data.items():
        if key in SECTIONS:
            if not isinstance(value, dict):
                unknown.append(f"section {key!r} must be an object")
                continue
            section = getattr(config, key)
            names = {f.name for f in fields(section)}
            unknown += [f"unknown field {key}.{k}" for k in value if k not in names]
            changes[key] = replace(
                section, **{k: v for k, v in value.items() if k in names}
            )
        elif key in ("num_users", "profile"):
            changes[key] = value
        else:
            unknown.append(f"unknown field {key}")
    if unknown:
        raise ConfigError(unknown)
    return replace(config, **changes)


def load_config(path=None, profile: str | None = None, overrides=None) -> RunConfig:
    """Build the effective configuration and validate it."""
    file_data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(f"config file {path} not found")
        try:
            file_data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(file_data, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")

    profile = profile or file_data.get("profile", "full")
    if not isinstance(profile, str) or profile not in PROFILES:
        raise ConfigError(
            f"profile must be one of {sorted(PROFILES)}, got {profile!r}"
        )
    config = merge(RunConfig(), {**PROFILES[profile], "profile": profile})
    config = merge(config, {k: v for k, v in file_data.items() if k != "profile"})
    if overrides:
        config = merge(config, overrides)
    return config.validate()
