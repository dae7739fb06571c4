import math

import numpy as np
import pandas as pd
import pytest

from ncbf.array import ArrayConfig, UserLocation
from ncbf.codebook import oracle_codebook
from ncbf.errors import ZeroDesiredGain
from ncbf.estimator.losses import LossKind
from ncbf.estimator.training import TrainReport
from ncbf.evaluation import (
    SUPPRESSION_CAP,
    CutMode,
    LossStats,
    loss_histogram,
    loss_statistics,
    pattern_cut,
    random_scenarios,
    relative_gain,
    summarize_sweep,
    suppression_report,
    suppression_sweep,
    write_csv,
)
from ncbf.lcmv import (
    BeamWeights,
    NcbfScenario,
    build_constraints,
    max_directivity_weights,
    solve_lcmv,
)


def _lcmv(config, scenario):
    return solve_lcmv(build_constraints(config, scenario))


def test_gain_at_desired_user_is_zero_db(ref_array, scenario_1):
    w = _lcmv(ref_array, scenario_1)
    desired = scenario_1.desired
    assert relative_gain(ref_array, w, desired, desired) == pytest.approx(0, abs=1e-9)


def test_lcmv_nulls_the_interferers(ref_array, scenario_1, scenario_2):
    for scenario in (scenario_1, scenario_2):
        w = _lcmv(ref_array, scenario)
        for loc in scenario.interferers:
            assert relative_gain(ref_array, w, loc, scenario.desired) <= -120


def test_gain_is_scale_invariant(ref_array, scenario_1):
    w = _lcmv(ref_array, scenario_1)
    point = UserLocation.from_degrees(5, 2.0)
    scaled = BeamWeights(w.values * (3 - 2j))
    assert relative_gain(ref_array, scaled, point, scenario_1.desired) == (
        pytest.approx(relative_gain(ref_array, w, point, scenario_1.desired))
    )


def test_zero_weights_have_no_desired_gain(ref_array, scenario_1):
    with pytest.raises(ZeroDesiredGain):
        relative_gain(
            ref_array, np.zeros(24), scenario_1.interferers[0], scenario_1.desired
        )


def test_matched_filter_peaks_at_the_desired_angle(ref_array):
    desired = UserLocation.from_degrees(12, 3.0)
    w = max_directivity_weights(ref_array, desired)
    cut = pattern_cut(
        ref_array,
        w,
        desired,
        CutMode.ANGULAR,
        3.0,
        math.radians(-40),
        math.radians(40),
        801,
    )
    assert list(cut.columns) == ["angle_deg", "gain_db"]
    assert len(cut) == 801
    assert cut["gain_db"].max() <= 0.01
    peak = cut.loc[cut["gain_db"].idxmax(), "angle_deg"]
    assert peak == pytest.approx(12, abs=0.2)


def test_radial_cut_through_a_null(ref_array, scenario_1):
    w = _lcmv(ref_array, scenario_1)
    interferer = scenario_1.interferers[0]
    step = 0.01
    start = interferer.range - 100 * step
    cut = pattern_cut(
        ref_array,
        w,
        scenario_1.desired,
        CutMode.RADIAL,
        interferer.angle,
        start,
        start + 200 * step,
        201,
    )
    assert list(cut.columns) == ["range_m", "gain_db"]
    deepest = cut["gain_db"].idxmin()
    assert cut["gain_db"].min() <= -60
    assert abs(cut.loc[deepest, "range_m"] - interferer.range) <= step + 1e-9


def test_single_point_cut(ref_array, scenario_1):
    w = _lcmv(ref_array, scenario_1)
    d = scenario_1.desired
    cut = pattern_cut(ref_array, w, d, CutMode.RADIAL, d.angle, d.range, d.range, 1)
    assert cut["gain_db"].tolist() == pytest.approx([0.0], abs=1e-9)


def test_uniform_weights_focus_at_boresight():
    config = ArrayConfig(16, 0.04, 3.5e9)
    far = UserLocation(0.0, 1000.0)
    cut = pattern_cut(
        config,
        np.ones(16),
        far,
        CutMode.ANGULAR,
        1000.0,
        math.radians(-30),
        math.radians(30),
        61,
    )
    assert cut.loc[cut["gain_db"].idxmax(), "angle_deg"] == pytest.approx(0.0)


def test_report_for_exact_weights(ref_array, scenario_1):
    w = _lcmv(ref_array, scenario_1)
    report = suppression_report(ref_array, scenario_1, w, w)
    assert len(report.suppression) == 2
    assert report.gaps == [0.0, 0.0]
    assert all(s >= 120 for s in report.suppression)
    assert all(s <= SUPPRESSION_CAP for s in report.suppression)
    assert report.user_gains[0] == pytest.approx(0, abs=1e-9)

    row = report.to_row(7)
    assert row["scenario"] == 7
    assert row["desired_angle_deg"] == pytest.approx(-32)
    assert {"suppression2_db", "lcmv_suppression2_db", "gap2_db"} <= row.keys()
    assert "baseline_suppression1_db" not in row


def test_matched_filter_suppresses_less_than_lcmv(ref_array, scenario_2):
    w = _lcmv(ref_array, scenario_2)
    baseline = max_directivity_weights(ref_array, scenario_2.desired)
    report = suppression_report(ref_array, scenario_2, w, w, baseline)
    for ours, theirs in zip(report.lcmv_suppression, report.baseline_suppression):
        assert theirs < ours
    assert "baseline_suppression2_db" in report.to_row(0)


def test_random_scenarios_are_reproducible(ref_array, ref_grid):
    a = random_scenarios(ref_array, ref_grid, 3, 5, seed=4)
    b = random_scenarios(ref_array, ref_grid, 3, 5, seed=4)
    c = random_scenarios(ref_array, ref_grid, 3, 5, seed=5)
    assert a == b
    assert a != c
    for scenario in a:
        for loc in scenario.users:
            assert ref_grid.spec.contains(loc)


def test_oracle_sweep(ref_array, ref_grid):
    codebook = oracle_codebook(ref_array, ref_grid, 3)
    scenarios = random_scenarios(ref_array, ref_grid, 3, 10, seed=2)
    outside = NcbfScenario(
        UserLocation.from_degrees(60, 3.0),
        (UserLocation.from_degrees(0, 2.0), UserLocation.from_degrees(20, 4.0)),
    )
    sweep, skipped = suppression_sweep(codebook, [*scenarios, outside])
    assert len(sweep) == 10
    assert skipped["scenario"].tolist() == [10]
    assert skipped["reason"][0].startswith("OutOfCoverage")
    assert sweep["suppression1_db"].min() >= 120
    assert "baseline_suppression1_db" in sweep.columns

    summary = summarize_sweep(sweep)
    assert summary["scenarios"] == 10
    assert summary["median_suppression_db"] >= 120
    assert summary["share_all_above_threshold"] == 1.0
    assert summary["max_abs_gap_db"] < 40


def test_summary_of_empty_sweep():
    assert summarize_sweep(pd.DataFrame()) == {"scenarios": 0}


def test_summary_threshold():
    sweep = pd.DataFrame(
        {
            "suppression1_db": [30.0, 10.0, 25.0, 40.0],
            "suppression2_db": [20.0, 50.0, 14.0, 16.0],
            "gap1_db": [1.0, -2.0, 0.0, 0.5],
            "gap2_db": [0.0, 3.0, 0.0, 0.0],
        }
    )
    summary = summarize_sweep(sweep, threshold=15)
    assert summary["median_suppression_db"] == 22.5
    assert summary["share_all_above_threshold"] == 0.5
    assert summary["min_suppression_db"] == 10.0
    assert summary["max_abs_gap_db"] == 3.0


def _report(train, test, loss=LossKind.CMAE):
    return TrainReport(
        loss=loss,
        train_losses=[train],
        test_losses=[test],
        learning_rates=[1e-3],
        final_train_loss=train,
        final_test_loss=test,
    )


def test_loss_statistics():
    reports = {
        3: (_report(0.07, 0.08), _report(0.5, 0.52, LossKind.RMSE)),
        1: (_report(0.08, 0.09), _report(0.4, 0.5, LossKind.RMSE)),
    }
    stats = loss_statistics(reports)
    assert stats.per_sector["sector"].tolist() == [1, 3]
    assert stats.mean("phase_test") == pytest.approx(0.085)
    assert stats.std("phase_test") == pytest.approx(0.005)

    table = stats.to_table()
    assert table["estimator"].tolist() == ["phase", "magnitude"]
    assert table["unit"].tolist() == ["rad", "dB"]
    assert table["codebook_size"].tolist() == [2, 2]
    assert table.loc[1, "train_mean"] == pytest.approx(0.45)


def test_loss_statistics_of_one_sector():
    stats = loss_statistics({0: (_report(0.1, 0.2), _report(1.0, 1.1))})
    assert stats.std("magnitude_test") == 0.0


def test_loss_statistics_need_reports():
    with pytest.raises(ValueError):
        loss_statistics({})


def test_loss_histogram():
    stats = LossStats(
        pd.DataFrame(
            {
                "sector": [0, 1, 2, 3],
                "phase_train": [0.1, 0.2, 0.3, 0.4],
                "phase_test": [0.1, 0.1, 0.1, 0.4],
                "magnitude_train": [1.0, 1.0, 1.0, 1.0],
                "magnitude_test": [0.5, 0.6, 0.7, 0.8],
            }
        )
    )
    hist = loss_histogram(stats, bins=3)
    assert len(hist) == 4 * 3
    for _, group in hist.groupby(["estimator", "split"]):
        assert group["count"].sum() == 4
    phase_test = hist[(hist["estimator"] == "phase") & (hist["split"] == "test")]
    assert phase_test["count"].tolist() == [3, 0, 1]


def test_write_csv_with_comment(tmp_path):
    path = tmp_path / "out.csv"
    write_csv(pd.DataFrame({"a": [1, 2], "b": [0.5, 0.25]}), path, "population SD")
    assert path.read_text(encoding="utf-8").splitlines() == [
        "# population SD",
        "a,b",
        "1,0.5",
        "2,0.25",
    ]
    frame = pd.read_csv(path, comment="#")
    assert frame["b"].tolist() == [0.5, 0.25]
