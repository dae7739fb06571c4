"""Beam patterns, interference suppression and loss statistics.

Gains are relative to the desired user's gain, so they do not depend on the
element pattern or on any global scaling of the weights.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ncbf._compat import StrEnum
from ncbf.array import ArrayConfig, UserLocation, channel_vector
from ncbf.dataset import DB_FLOOR, sample_scenario
from ncbf.errors import NcbfError, ZeroDesiredGain
from ncbf.lcmv import (
    BeamWeights,
    NcbfScenario,
    build_constraints,
    max_directivity_weights,
    response,
    solve_lcmv,
)
from ncbf.partition import Sector, SectorGrid

SUPPRESSION_CAP = 160.0  # dB


class CutMode(StrEnum):
    ANGULAR = "angular"  # sweep psi at a fixed range
    RADIAL = "radial"  # sweep r at a fixed angle


def _values(weights) -> np.ndarray:
    if isinstance(weights, BeamWeights):
        return weights.values
    return np.asarray(weights, dtype=np.complex128)


def relative_gain(
    config: ArrayConfig, weights, loc: UserLocation, desired_loc: UserLocation
) -> float:
    """20 log10(|h(loc)^H w| / |h(desired)^H w|), in dB.

    Returns -inf at an exact null.
    """
    w = _values(weights)
    desired = abs(response(channel_vector(config, desired_loc), w))
    if not desired > 0:
        raise ZeroDesiredGain(
            f"weights have zero gain at the desired user {desired_loc!r}"
        )
    ratio = abs(response(channel_vector(config, loc), w)) / desired
    if ratio == 0:
        return -math.inf
    return 20 * math.log10(ratio)


def pattern_cut(
    config: ArrayConfig,
    weights,
    desired: UserLocation,
    mode: CutMode,
    fixed: float,
    start: float,
    stop: float,
    count: int,
) -> pd.DataFrame:
    """Relative gain sampled uniformly along an angular or radial cut.

    `fixed`, `start` and `stop` are meters for ranges and radians for angles;
    the table reports angles in degrees. Gains are floored at DB_FLOOR.
    """
    coordinates = np.linspace(start, stop, count)
    gains = []
    for value in coordinates:
        if mode == CutMode.ANGULAR:
            loc = UserLocation(float(value), fixed)
        else:
            loc = UserLocation(fixed, float(value))
        gains.append(max(relative_gain(config, weights, loc, desired), DB_FLOOR))
    if mode == CutMode.ANGULAR:
        return pd.DataFrame({"angle_deg": np.degrees(coordinates), "gain_db": gains})
    return pd.DataFrame({"range_m": coordinates, "gain_db": gains})


def _suppression(gain_db: float) -> float:
    return min(-gain_db, SUPPRESSION_CAP)


@dataclass
class SuppressionReport:
    """Per-user gains and per-interferer suppression of a predicted beam.

    Suppressions are capped at SUPPRESSION_CAP for both the predicted and the
    LCMV weights, so identical weights give a zero gap.
    """

    scenario: NcbfScenario
    user_gains: list[float]
    suppression: list[float]
    lcmv_suppression: list[float]
    baseline_suppression: list[float] = field(default_factory=list)

    @property
    def gaps(self) -> list[float]:
        return [a - b for a, b in zip(self.suppression, self.lcmv_suppression)]

    def to_row(self, scenario_id) -> dict:
        row = {
            "scenario": scenario_id,
            "desired_angle_deg": self.scenario.desired.angle_deg,
            "desired_range_m": self.scenario.desired.range,
        }
        for k, loc in enumerate(self.scenario.interferers, start=1):
            row[f"interferer{k}_angle_deg"] = loc.angle_deg
            row[f"interferer{k}_range_m"] = loc.range
            row[f"suppression{k}_db"] = self.suppression[k - 1]
            row[f"lcmv_suppression{k}_db"] = self.lcmv_suppression[k - 1]
            row[f"gap{k}_db"] = self.gaps[k - 1]
            if self.baseline_suppression:
                row[f"baseline_suppression{k}_db"] = self.baseline_suppression[k - 1]
        return row


def suppression_report(
    config: ArrayConfig,
    scenario: NcbfScenario,
    dnn_weights,
    lcmv_weights,
    baseline_weights=None,
) -> SuppressionReport:
    desired = scenario.desired
    user_gains = [
        relative_gain(config, dnn_weights, u, desired) for u in scenario.users
    ]
    lcmv = [
        relative_gain(config, lcmv_weights, u, desired) for u in scenario.interferers
    ]
    baseline = []
    if baseline_weights is not None:
        baseline = [
            _suppression(relative_gain(config, baseline_weights, u, desired))
            for u in scenario.interferers
        ]
    return SuppressionReport(
        scenario=scenario,
        user_gains=user_gains,
        suppression=[_suppression(g) for g in user_gains[1:]],
        lcmv_suppression=[_suppression(g) for g in lcmv],
        baseline_suppression=baseline,
    )


def random_scenarios(
    config: ArrayConfig, grid: SectorGrid, num_users: int, count: int, seed: int
) -> list[NcbfScenario]:
    """Scenarios with every user drawn uniformly over the coverage area."""
    spec = grid.spec
    coverage = Sector(-1, -1, spec.psi_min, spec.psi_max, spec.r_min, spec.r_max)
    rng = np.random.default_rng(seed)
    return [
        sample_scenario(config, grid, coverage, num_users, rng) for _ in range(count)
    ]


def suppression_sweep(codebook, scenarios, with_baseline: bool = True):
    """Evaluate the codebook on every scenario against its LCMV reference.

    Returns the sweep table and the table of skipped scenarios with the reason
    each one was skipped.
    """
    from ncbf.codebook import predict_weights

    config = codebook.config
    rows, skipped = [], []
    for i, scenario in enumerate(scenarios):
        try:
            predicted = predict_weights(codebook, scenario)
            lcmv = solve_lcmv(build_constraints(config, scenario))
            baseline = None
            if with_baseline:
                baseline = max_directivity_weights(config, scenario.desired)
            report = suppression_report(config, scenario, predicted, lcmv, baseline)
        except (NcbfError, ValueError) as e:
            logging.warning(f"Skipping scenario {i}: {e}")
            skipped.append({"scenario": i, "reason": f"{type(e).__name__}: {e}"})
            continue
        rows.append(report.to_row(i))
    return pd.DataFrame(rows), pd.DataFrame(skipped, columns=["scenario", "reason"])


def summarize_sweep(sweep: pd.DataFrame, threshold: float = 15.0) -> dict:
    """Median suppression and the share of scenarios whose every interferer
    reaches `threshold` dB."""
    columns = [c for c in sweep.columns if c.startswith("suppression")]
    if sweep.empty or not columns:
        return {"scenarios": 0}
    values = sweep[columns].to_numpy()
    return {
        "scenarios": len(sweep),
        "median_suppression_db": float(np.median(values)),
        "min_suppression_db": float(values.min()),
        "share_all_above_threshold": float(np.mean(values.min(axis=1) >= threshold)),
        "threshold_db": threshold,
        "max_abs_gap_db": float(
            sweep[[c for c in sweep.columns if c.startswith("gap")]].abs().max().max()
        ),
    }


@dataclass
class LossStats:
    """Final train/test losses per sector and their aggregates.

    Standard deviations use the population convention (divide by count).
    """

    per_sector: pd.DataFrame

    COLUMNS = ("phase_train", "phase_test", "magnitude_train", "magnitude_test")

    @property
    def num_sectors(self) -> int:
        return len(self.per_sector)

    def mean(self, column: str) -> float:
        return float(np.mean(self.per_sector[column].to_numpy()))

    def std(self, column: str) -> float:
        return float(np.std(self.per_sector[column].to_numpy(), ddof=0))

    def to_table(self) -> pd.DataFrame:
        rows = []
        for estimator, unit in (("phase", "rad"), ("magnitude", "dB")):
            rows.append(
                {
                    "codebook_size": self.num_sectors,
                    "estimator": estimator,
                    "unit": unit,
                    "train_mean": self.mean(f"{estimator}_train"),
                    "train_sd": self.std(f"{estimator}_train"),
                    "test_mean": self.mean(f"{estimator}_test"),
                    "test_sd": self.std(f"{estimator}_test"),
                }
            )
        return pd.DataFrame(rows)


def loss_statistics(reports) -> LossStats:
    """Aggregate per-sector (phase, magnitude) TrainReports."""
    if not reports:
        raise ValueError("loss statistics need at least one sector report")
    rows = []
    for sector, (phase, magnitude) in sorted(reports.items()):
        rows.append(
            {
                "sector": sector,
                "phase_train": phase.final_train_loss,
                "phase_test": phase.final_test_loss,
                "magnitude_train": magnitude.final_train_loss,
                "magnitude_test": magnitude.final_test_loss,
            }
        )
    return LossStats(pd.DataFrame(rows))


def loss_histogram(stats: LossStats, bins: int = 10) -> pd.DataFrame:
    rows = []
    for column in LossStats.COLUMNS:
        estimator, split = column.split("_")
        counts, edges = np.histogram(stats.per_sector[column].to_numpy(), bins=bins)
        for count, lo, hi in zip(counts, edges[:-1], edges[1:]):
            rows.append(
                {
                    "estimator": estimator,
                    "split": split,
                    "bin_lo": float(lo),
                    "bin_hi": float(hi),
                    "count": int(count),
                }
            )
    return pd.DataFrame(rows)


def write_csv(frame: pd.DataFrame, path, comment: str | None = None):
    """Write a UTF-8 CSV, optionally preceded by a '# ' comment line."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        if comment:
            f.write(f"# {comment}\n")
        frame.to_csv(f, index=False, lineterminator="\n")
