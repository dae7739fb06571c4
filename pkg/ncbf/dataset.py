"""Per-sector scenario sampling, LCMV labelling and dataset files.

A dataset file is a little-endian header followed by float32 records::

    magic "NCBF" | u32 version | u32 N | u32 K | u64 record_count
    record = 2K normalized inputs | N phases (rad) | N magnitudes (dB)

Each file has a JSON sidecar mirroring DatasetMeta.
"""

import json
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ncbf.array import ArrayConfig, UserLocation, channel_vector, vector_correlation
from ncbf.errors import (
    CorruptFile,
    IncompatibleVersion,
    MissingArtifact,
    SamplingExhausted,
    SingularConstraints,
)
from ncbf.lcmv import (
    MAX_USER_CORRELATION,
    BeamWeights,
    NcbfScenario,
    build_constraints,
    solve_lcmv,
)
from ncbf.partition import PartitionSpec, Sector, SectorGrid

DATASET_MAGIC = b"NCBF"
DATASET_VERSION = 1
HEADER = struct.Struct("<4sIIIQ")
DB_FLOOR = -300.0
MAX_RETRIES = 100


@dataclass(frozen=True, eq=False)
class ScenarioSample:
    scenario: NcbfScenario
    inputs: np.ndarray
    phases: np.ndarray
    magnitudes_db: np.ndarray


@dataclass(frozen=True)
class DatasetMeta:
    sector: int
    num_users: int
    num_elements: int
    train_count: int
    test_count: int
    split: float
    r_min: float
    r_max: float
    psi_min: float
    psi_max: float
    seed: int
    version: int = DATASET_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetMeta":
        return cls(**json.loads(text))


class DatasetFile:
    """Label records of one split, stored as a float32 matrix."""

    def __init__(self, num_elements: int, num_users: int, records: np.ndarray):
        width = 2 * num_users + 2 * num_elements
        records = np.asarray(records, dtype="<f4").reshape(-1, width)
        self.num_elements = num_elements
        self.num_users = num_users
        self.records = records

    @classmethod
    def from_samples(cls, num_elements, num_users, samples) -> "DatasetFile":
        width = 2 * num_users + 2 * num_elements
        records = np.empty((len(samples), width), dtype="<f4")
        for i, sample in enumerate(samples):
            records[i] = np.concatenate(
                [sample.inputs, sample.phases, sample.magnitudes_db]
            )
        return cls(num_elements, num_users, records)

    @classmethod
    def from_bytes(cls, data: bytes) -> "DatasetFile":
        if len(data) < HEADER.size:
            raise CorruptFile(f"dataset file truncated: {len(data)} header bytes")
        magic, version, n, k, count = HEADER.unpack_from(data)
        if magic != DATASET_MAGIC:
            raise CorruptFile(f"bad dataset magic {magic!r}")
        if version != DATASET_VERSION:
            raise IncompatibleVersion("dataset file", version, DATASET_VERSION)
        width = 2 * k + 2 * n
        expected = HEADER.size + count * width * 4
        if len(data) != expected:
            raise CorruptFile(
                f"dataset file has {len(data)} bytes, header promises {expected}"
            )
        records = np.frombuffer(data, dtype="<f4", offset=HEADER.size)
        return cls(n, k, records.reshape(count, width).copy())

    def to_bytes(self) -> bytes:
        header = HEADER.pack(
            DATASET_MAGIC,
            DATASET_VERSION,
            self.num_elements,
            self.num_users,
            len(self.records),
        )
        return header + self.records.astype("<f4").tobytes()

    @classmethod
    def read(cls, path) -> "DatasetFile":
        path = Path(path)
        if not path.exists():
            raise MissingArtifact(f"dataset file {path} not found")
        return cls.from_bytes(path.read_bytes())

    def write(self, path):
        Path(path).write_bytes(self.to_bytes())

    def __len__(self):
        return len(self.records)

    @property
    def inputs(self) -> np.ndarray:
        return self.records[:, : 2 * self.num_users]

    @property
    def phases(self) -> np.ndarray:
        start = 2 * self.num_users
        return self.records[:, start : start + self.num_elements]

    @property
    def magnitudes_db(self) -> np.ndarray:
        return self.records[:, 2 * self.num_users + self.num_elements :]

    def __repr__(self):
        return (
            f"<DatasetFile N={self.num_elements} K={self.num_users} "
            f"records={len(self)}>"
        )


def is_admissible(
    config: ArrayConfig,
    candidate: UserLocation,
    placed: list[UserLocation],
    threshold: float = MAX_USER_CORRELATION,
) -> bool:
    h = channel_vector(config, candidate)
    return all(
        vector_correlation(h, channel_vector(config, other)) <= threshold
        for other in placed
    )


def _uniform_location(rng, psi_lo, psi_hi, r_lo, r_hi) -> UserLocation:
    psi = float(rng.uniform(psi_lo, psi_hi))
    r = float(rng.uniform(r_lo, r_hi))
    return UserLocation(psi, r)


def sample_scenario(
    config: ArrayConfig,
    grid: SectorGrid,
    sector: Sector,
    num_users: int,
    rng: np.random.Generator,
    max_retries: int = MAX_RETRIES,
) -> NcbfScenario:
    """Desired user uniform over the sector's (psi, r) rectangle, interferers
    uniform over the whole coverage rectangle."""
    spec = grid.spec
    desired = _uniform_location(
        rng, sector.psi_lo, sector.psi_hi, sector.r_lo, sector.r_hi
    )
    placed = [desired]
    for k in range(num_users - 1):
        for attempt in range(max_retries):
            candidate = _uniform_location(
                rng, spec.psi_min, spec.psi_max, spec.r_min, spec.r_max
            )
            if is_admissible(config, candidate, placed):
                placed.append(candidate)
                break
            logging.debug(f"Rejected interferer {candidate!r} (attempt {attempt})")
        else:
            raise SamplingExhausted(
                f"no admissible interferer {k + 1} for sector {sector.id} after "
                f"{max_retries} draws"
            )
    return NcbfScenario(desired, tuple(placed[1:]))


def weights_to_labels(weights: BeamWeights) -> tuple[np.ndarray, np.ndarray]:
    """Phases wrapped to [-pi, pi) with element 0 at 0, magnitudes in dB."""
    phases = np.angle(weights.values)
    phases = np.where(phases >= np.pi, phases - 2 * np.pi, phases)
    phases[0] = 0.0
    with np.errstate(divide="ignore"):
        magnitudes_db = 20 * np.log10(weights.magnitudes)
    return phases, np.maximum(magnitudes_db, DB_FLOOR)


def label_scenario(
    config: ArrayConfig, scenario: NcbfScenario
) -> tuple[np.ndarray, np.ndarray]:
    return weights_to_labels(solve_lcmv(build_constraints(config, scenario)))


def _canonical_interferers(scenario: NcbfScenario) -> list[UserLocation]:
    return sorted(scenario.interferers, key=lambda loc: (loc.angle, loc.range))


def normalize_inputs(scenario: NcbfScenario, spec: PartitionSpec) -> np.ndarray:
    """Min-max scale (psi, r) of every user to [0, 1]; desired user first,
    interferers sorted by (psi, r)."""
    users = [scenario.desired, *_canonical_interferers(scenario)]
    values = []
    for loc in users:
        values.append((loc.angle - spec.psi_min) / (spec.psi_max - spec.psi_min))
        values.append((loc.range - spec.r_min) / (spec.r_max - spec.r_min))
    return np.array(values, dtype=np.float64)


def denormalize_inputs(inputs: np.ndarray, spec: PartitionSpec) -> NcbfScenario:
    pairs = np.asarray(inputs, dtype=np.float64).reshape(-1, 2)
    users = [
        UserLocation(
            spec.psi_min + float(a) * (spec.psi_max - spec.psi_min),
            spec.r_min + float(r) * (spec.r_max - spec.r_min),
        )
        for a, r in pairs
    ]
    return NcbfScenario(users[0], tuple(users[1:]))


def make_sample(
    config: ArrayConfig, scenario: NcbfScenario, spec: PartitionSpec
) -> ScenarioSample:
    phases, magnitudes_db = label_scenario(config, scenario)
    return ScenarioSample(
        scenario=scenario,
        inputs=normalize_inputs(scenario, spec),
        phases=phases,
        magnitudes_db=magnitudes_db,
    )


def draw_samples(
    config: ArrayConfig,
    grid: SectorGrid,
    sector: Sector,
    num_users: int,
    size: int,
    rng: np.random.Generator,
) -> list[ScenarioSample]:
    samples = []
    failures = 0
    while len(samples) < size:
        scenario = sample_scenario(config, grid, sector, num_users, rng)
        try:
            samples.append(make_sample(config, scenario, grid.spec))
            failures = 0
        except SingularConstraints as e:
            failures += 1
            logging.debug(f"Redrawing singular scenario: {e}")
            if failures >= MAX_RETRIES:
                raise SamplingExhausted(
                    f"{failures} consecutive singular scenarios in sector "
                    f"{sector.id}"
                ) from e
    return samples


def train_count(size: int, split: float) -> int:
    return math.ceil(round(split * size, 9))


def dataset_paths(directory, sector_id: int) -> dict[str, Path]:
    directory = Path(directory)
    stem = f"sector_{sector_id:03d}"
    return {
        "train": directory / f"{stem}_train.ncbf",
        "test": directory / f"{stem}_test.ncbf",
        "meta": directory / f"{stem}.json",
    }


def generate_dataset(
    config: ArrayConfig,
    grid: SectorGrid,
    sector_id: int,
    size: int,
    split: float,
    seed: int,
    num_users: int,
    directory,
) -> DatasetMeta:
    """Write train/test files and the sidecar for one sector.

    The generator is seeded with (seed, sector_id), so the bytes depend only
    on those and the arguments.
    """
    sector = grid.sectors[sector_id]
    rng = np.random.default_rng([seed, sector_id])
    samples = draw_samples(config, grid, sector, num_users, size, rng)
    n_train = train_count(size, split)

    paths = dataset_paths(directory, sector_id)
    paths["train"].parent.mkdir(parents=True, exist_ok=True)
    n = config.num_elements
    DatasetFile.from_samples(n, num_users, samples[:n_train]).write(paths["train"])
    DatasetFile.from_samples(n, num_users, samples[n_train:]).write(paths["test"])

    spec = grid.spec
    meta = DatasetMeta(
        sector=sector_id,
        num_users=num_users,
        num_elements=n,
        train_count=n_train,
        test_count=size - n_train,
        split=split,
        r_min=spec.r_min,
        r_max=spec.r_max,
        psi_min=spec.psi_min,
        psi_max=spec.psi_max,
        seed=seed,
    )
    paths["meta"].write_text(meta.to_json())
    logging.info(
        f"Sector {sector_id}: wrote {meta.train_count} train / "
        f"{meta.test_count} test samples"
    )
    return meta


def meta_mismatches(
    meta: DatasetMeta,
    config: ArrayConfig,
    spec: PartitionSpec,
    sector_id: int,
    num_users: int,
    size: int,
    split: float,
    seed: int,
) -> list[str]:
    """Fields where a stored dataset differs from the requested one."""
    expected = {
        "sector": sector_id,
        "num_users": num_users,
        "num_elements": config.num_elements,
        "size": size,
        "split": split,
        "seed": seed,
        "r_min": spec.r_min,
        "r_max": spec.r_max,
        "psi_min": spec.psi_min,
        "psi_max": spec.psi_max,
    }
    stored = {**asdict(meta), "size": meta.train_count + meta.test_count}
    return [
        f"{name} {stored[name]} != {value}"
        for name, value in expected.items()
        if stored[name] != value
    ]


def load_dataset(directory, sector_id: int):
    """Returns (train, test, meta) for one sector."""
    paths = dataset_paths(directory, sector_id)
    if not paths["meta"].exists():
        raise MissingArtifact(f"no dataset for sector {sector_id} in {directory}")
    meta = DatasetMeta.from_json(paths["meta"].read_text())
    train = DatasetFile.read(paths["train"])
    test = DatasetFile.read(paths["test"])
    if len(train) != meta.train_count or len(test) != meta.test_count:
        raise CorruptFile(
            f"sector {sector_id} record counts {len(train)}/{len(test)} do not "
            f"match metadata {meta.train_count}/{meta.test_count}"
        )
    return train, test, meta


def generate_datasets(
    config: ArrayConfig,
    grid: SectorGrid,
    sector_ids,
    size: int,
    split: float,
    seed: int,
    num_users: int,
    directory,
    workers: int = 1,
) -> list[DatasetMeta]:
    jobs = [
        (config, grid, sid, size, split, seed, num_users, directory)
        for sid in sector_ids
    ]
    if workers <= 1:
        return [generate_dataset(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_generate_job, jobs))


def _generate_job(job):
    return generate_dataset(*job)
