"""The DNN codebook: one phase and one magnitude estimator per sector.

On disk a codebook is a directory::

    manifest.json                  K, N, seeds, per-sector losses and hashes
    grid.json, grid.txt            sector grid descriptor and table
    sector_XXX_phase.mlpw          model files, one pair per sector
    sector_XXX_magnitude.mlpw
    curves/sector_XXX_<kind>.csv   per-epoch losses
"""

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ncbf.array import ArrayConfig
from ncbf.dataset import (
    generate_dataset,
    load_dataset,
    meta_mismatches,
    normalize_inputs,
)
from ncbf.errors import (
    IncompleteCodebook,
    KMismatch,
    MissingArtifact,
    NonFinite,
    ShapeMismatch,
)
from ncbf.estimator import BaseEstimator, get_estimator
from ncbf.lcmv import BeamWeights, NcbfScenario, normalize_and_reference
from ncbf.partition import SectorGrid, locate

MANIFEST_VERSION = 1
KINDS = ("phase", "magnitude")


@dataclass
class SectorModels:
    phase: BaseEstimator
    magnitude: BaseEstimator


@dataclass
class Codebook:
    config: ArrayConfig
    grid: SectorGrid
    num_users: int
    models: dict[int, SectorModels] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def num_elements(self) -> int:
        return self.config.num_elements

    @property
    def missing_sectors(self) -> list[int]:
        return [s.id for s in self.grid.sectors if s.id not in self.models]

    @property
    def complete(self) -> bool:
        return not self.missing_sectors

    def select(self, scenario: NcbfScenario) -> tuple[int, SectorModels]:
        if scenario.num_users != self.num_users:
            raise KMismatch(
                f"scenario has K={scenario.num_users} users, codebook was trained "
                f"for K={self.num_users}"
            )
        sector = locate(self.grid, scenario.desired)
        if sector not in self.models:
            raise IncompleteCodebook(f"codebook has no models for sector {sector}")
        return sector, self.models[sector]


@dataclass(frozen=True)
class DatasetSettings:
    size: int
    split: float
    seed: int


@dataclass(frozen=True)
class TrainingSettings:
    dims: tuple[int, ...]
    epochs: int
    batch_size: int
    learning_rate: float
    decay: float
    seed: int
    threads: int = 1


def reconstruct(phases, magnitudes_db) -> BeamWeights:
    """Invert the label preprocessing: dB to linear, unit power, phase 0 on
    element 0."""
    phases = np.asarray(phases, dtype=np.float64)
    magnitudes_db = np.asarray(magnitudes_db, dtype=np.float64)
    if phases.shape != magnitudes_db.shape:
        raise ShapeMismatch(
            f"{phases.shape[0]} phases but {magnitudes_db.shape[0]} magnitudes"
        )
    if not (np.all(np.isfinite(phases)) and np.all(np.isfinite(magnitudes_db))):
        raise NonFinite("estimator produced non-finite phases or magnitudes")
    magnitudes = 10 ** (magnitudes_db / 20)
    magnitudes = magnitudes / np.linalg.norm(magnitudes)
    return normalize_and_reference(magnitudes * np.exp(1j * phases))


def predict_weights(codebook: Codebook, scenario: NcbfScenario) -> BeamWeights:
    _, models = codebook.select(scenario)
    inputs = normalize_inputs(scenario, codebook.grid.spec)[np.newaxis, :]
    phases = models.phase.predict(inputs)[0]
    magnitudes_db = models.magnitude.predict(inputs)[0]
    return reconstruct(phases, magnitudes_db)


def oracle_codebook(
    config: ArrayConfig, grid: SectorGrid, num_users: int
) -> Codebook:
    """Codebook whose estimators replay exact LCMV labels."""
    models = {}
    for sector in grid.sectors:
        pair = {
            kind: get_estimator("oracle", config=config, spec=grid.spec, output=kind)
            for kind in KINDS
        }
        models[sector.id] = SectorModels(**pair)
    return Codebook(config, grid, num_users, models, {"estimator": "oracle"})


def model_seed(seed: int, sector: int, kind: str) -> int:
    state = np.random.SeedSequence([seed, sector, KINDS.index(kind)]).generate_state(1)
    return int(state[0])


def model_path(directory, sector: int, kind: str) -> Path:
    return Path(directory) / f"sector_{sector:03d}_{kind}.mlpw"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def train_sector(
    config: ArrayConfig,
    grid: SectorGrid,
    num_users: int,
    sector: int,
    dataset: DatasetSettings,
    training: TrainingSettings,
    dataset_dir,
    codebook_dir,
) -> dict:
    """Train and save both estimators for one sector; returns its manifest
    entry."""
    from ncbf.estimator.losses import LossKind
    from ncbf.estimator.mlp import init_model, save_model
    from ncbf.estimator.training import TrainConfig, train

    try:
        train_set, test_set, meta = load_dataset(dataset_dir, sector)
        stale = meta_mismatches(
            meta,
            config,
            grid.spec,
            sector,
            num_users,
            dataset.size,
            dataset.split,
            dataset.seed,
        )
        if stale:
            logging.warning(
                f"Sector {sector}: stored dataset does not match the run "
                f"({'; '.join(stale)}), regenerating"
            )
    except MissingArtifact:
        stale = ["missing"]
    if stale:
        generate_dataset(
            config,
            grid,
            sector,
            dataset.size,
            dataset.split,
            dataset.seed,
            num_users,
            dataset_dir,
        )
        train_set, test_set, _ = load_dataset(dataset_dir, sector)

    codebook_dir = Path(codebook_dir)
    (codebook_dir / "curves").mkdir(parents=True, exist_ok=True)
    entry = {}
    for kind, loss, targets in (
        ("phase", LossKind.CMAE, "phases"),
        ("magnitude", LossKind.RMSE, "magnitudes_db"),
    ):
        seed = model_seed(training.seed, sector, kind)
        model = init_model(training.dims, seed)
        model, report = train(
            model,
            (train_set.inputs, getattr(train_set, targets)),
            (test_set.inputs, getattr(test_set, targets)),
            TrainConfig(
                epochs=training.epochs,
                batch_size=training.batch_size,
                learning_rate=training.learning_rate,
                decay=training.decay,
                seed=seed,
                loss=loss,
                threads=training.threads,
            ),
        )
        path = model_path(codebook_dir, sector, kind)
        save_model(model, path)
        report.to_frame().to_csv(
            codebook_dir / "curves" / f"sector_{sector:03d}_{kind}.csv", index=False
        )
        summary = report.to_dict()
        summary.pop("wall_time")
        entry[kind] = {"file": path.name, "sha256": _sha256(path), "report": summary}
        logging.info(
            f"Sector {sector} {kind}: train {report.final_train_loss:.4f}, "
            f"test {report.final_test_loss:.4f} ({loss}, {report.wall_time:.1f}s)"
        )
    return entry


def _train_sector_job(job):
    sector = job[3]
    try:
        return sector, train_sector(*job), None
    except Exception as e:
        logging.error(f"Sector {sector} failed: {e}")
        return sector, None, f"{type(e).__name__}: {e}"


def read_manifest(codebook_dir) -> dict | None:
    path = Path(codebook_dir) / "manifest.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())


def write_manifest(codebook_dir, manifest: dict):
    path = Path(codebook_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def train_codebook(
    config: ArrayConfig,
    grid: SectorGrid,
    num_users: int,
    dataset: DatasetSettings,
    training: TrainingSettings,
    dataset_dir,
    codebook_dir,
    sector_ids=None,
    workers: int = 1,
) -> tuple[dict, dict[int, str]]:
    """Train the selected sectors (all by default) and update the manifest.

    A failing sector is recorded and does not stop the others. Returns the
    manifest and the failures by sector id.
    """
    codebook_dir = Path(codebook_dir)
    codebook_dir.mkdir(parents=True, exist_ok=True)
    if sector_ids is None:
        sector_ids = [s.id for s in grid.sectors]

    manifest = read_manifest(codebook_dir)
    header = {
        "version": MANIFEST_VERSION,
        "num_users": num_users,
        "num_elements": config.num_elements,
        "array": asdict(config),
        "num_sectors": grid.num_sectors,
        "dataset": asdict(dataset),
        "training": asdict(training),
    }
    header = json.loads(json.dumps(header))
    if manifest is None or any(manifest.get(k) != v for k, v in header.items()):
        manifest = {**header, "sectors": {}, "failed": {}}
    (codebook_dir / "grid.json").write_text(
        json.dumps(grid.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    (codebook_dir / "grid.txt").write_text(grid.to_table())

    jobs = [
        (config, grid, num_users, sid, dataset, training, dataset_dir, codebook_dir)
        for sid in sector_ids
    ]
    if workers <= 1:
        results = [_train_sector_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_sector_job, jobs))

    failures = {}
    for sector, entry, error in results:
        key = str(sector)
        if error is None:
            manifest["sectors"][key] = entry
            manifest["failed"].pop(key, None)
        else:
            manifest["sectors"].pop(key, None)
            manifest["failed"][key] = error
            failures[sector] = error
    manifest["complete"] = len(manifest["sectors"]) == grid.num_sectors
    write_manifest(codebook_dir, manifest)
    return manifest, failures


def load_codebook(codebook_dir, config: ArrayConfig, require_complete=True) -> Codebook:
    """Load a trained codebook, verifying every model file's hash."""
    codebook_dir = Path(codebook_dir)
    manifest = read_manifest(codebook_dir)
    if manifest is None:
        raise MissingArtifact(f"no codebook manifest in {codebook_dir}")
    if manifest["num_elements"] != config.num_elements:
        raise KMismatch(
            f"codebook was trained for N={manifest['num_elements']}, "
            f"configuration has N={config.num_elements}"
        )
    grid = SectorGrid.from_dict(json.loads((codebook_dir / "grid.json").read_text()))
    if require_complete and not manifest.get("complete"):
        missing = grid.num_sectors - len(manifest["sectors"])
        raise IncompleteCodebook(
            f"codebook in {codebook_dir} is missing {missing} of "
            f"{grid.num_sectors} sectors (failed: {sorted(manifest['failed'])})"
        )

    models = {}
    for key, entry in manifest["sectors"].items():
        pair = {}
        for kind in KINDS:
            path = codebook_dir / entry[kind]["file"]
            if not path.exists():
                raise MissingArtifact(f"model file {path} not found")
            if _sha256(path) != entry[kind]["sha256"]:
                raise IncompleteCodebook(f"model file {path} does not match manifest")
            pair[kind] = get_estimator("mlp", path=path)
        models[int(key)] = SectorModels(**pair)
    return Codebook(config, grid, manifest["num_users"], models, manifest)


def save_codebook(codebook: Codebook, codebook_dir) -> dict:
    """Write an MLP-backed codebook in the on-disk layout; returns the
    manifest."""
    from ncbf.estimator.mlp import MlpEstimator, save_model

    codebook_dir = Path(codebook_dir)
    codebook_dir.mkdir(parents=True, exist_ok=True)
    sectors = {}
    for sid, pair in sorted(codebook.models.items()):
        entry = {}
        for kind in KINDS:
            estimator = getattr(pair, kind)
            if not isinstance(estimator, MlpEstimator):
                raise TypeError(f"sector {sid} {kind} estimator is not an MLP")
            path = model_path(codebook_dir, sid, kind)
            save_model(estimator.model, path)
            previous = codebook.provenance.get("sectors", {}).get(str(sid), {})
            entry[kind] = {
                "file": path.name,
                "sha256": _sha256(path),
                "report": previous.get(kind, {}).get("report"),
            }
        sectors[str(sid)] = entry

    manifest = {
        k: v
        for k, v in codebook.provenance.items()
        if k not in ("sectors", "failed", "complete")
    }
    manifest.update(
        version=MANIFEST_VERSION,
        num_users=codebook.num_users,
        num_elements=codebook.num_elements,
        array=asdict(codebook.config),
        num_sectors=codebook.grid.num_sectors,
        sectors=sectors,
        failed={},
        complete=codebook.complete,
    )
    (codebook_dir / "grid.json").write_text(
        json.dumps(codebook.grid.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    (codebook_dir / "grid.txt").write_text(codebook.grid.to_table())
    write_manifest(codebook_dir, manifest)
    return manifest


def sector_reports(manifest: dict) -> dict:
    """Per-sector (phase, magnitude) TrainReports recorded in a manifest."""
    from ncbf.estimator.training import TrainReport

    reports = {}
    for key, entry in manifest.get("sectors", {}).items():
        if any(entry[kind].get("report") is None for kind in KINDS):
            continue
        reports[int(key)] = tuple(
            TrainReport.from_dict({**entry[kind]["report"], "wall_time": 0.0})
            for kind in KINDS
        )
    return reports


def check_grid(codebook: Codebook, grid: SectorGrid):
    if codebook.grid.num_sectors != grid.num_sectors:
        raise MissingArtifact(
            f"codebook grid has {codebook.grid.num_sectors} sectors, the current "
            f"partition has {grid.num_sectors}"
        )
