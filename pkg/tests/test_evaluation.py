"""Split semantics, the separation-ratio metric, and the ablation harness."""

import io

import numpy as np
import pytest

from fleetrisk.errors import DegeneratePanelError, SingleClassLabelsError, ZeroFalseMeanError
from fleetrisk.evaluation import (
    N_BINS,
    ChronologicalSplit,
    RandomRowSplit,
    ablation,
    evaluate_split,
    report_to_dict,
    separation_ratio,
    split,
    write_ablation_csv,
    write_eval_report,
    write_histogram_csv,
)
from fleetrisk.features import FeatureSpec
from fleetrisk.models import LogisticHyper
from fleetrisk.panel import PanelRow, panel_from_rows


def grid_panel(n_assets=6, n_weeks=10, flag_every=3):
    rows = []
    for a in range(n_assets):
        asset = f"V{a:02d}"
        vtype = "bus" if a % 2 == 0 else "truck"
        for w in range(n_weeks):
            rows.append(
                PanelRow(
                    asset_id=asset,
                    vehicle_type=vtype,
                    unit="82 LRS",
                    week=w,
                    operational_weeks=w,
                    weeks_since_last_visit=w % flag_every,
                    utilization=float(w * (a + 1)),
                    repair_flag=1 if (w + a) % flag_every == 0 else 0,
                )
            )
    return panel_from_rows(rows)


def test_split_fraction_validation():
    with pytest.raises(ValueError):
        RandomRowSplit(test_fraction=0.0)
    with pytest.raises(ValueError):
        RandomRowSplit(test_fraction=1.0)
    with pytest.raises(ValueError):
        ChronologicalSplit(test_fraction=-0.1)


def test_random_split_partitions_rows():
    panel = grid_panel()
    train, test = split(panel, RandomRowSplit(test_fraction=0.3, seed=5))
    assert len(train) + len(test) == len(panel)
    keys = {(r.asset_id, r.week) for r in panel.rows}
    assert {(r.asset_id, r.week) for r in train.rows} | {(r.asset_id, r.week) for r in test.rows} == keys


def test_random_split_matches_seeded_draws():
    panel = grid_panel()
    spec = RandomRowSplit(test_fraction=0.4, seed=123)
    _, test = split(panel, spec)
    expected = np.random.default_rng(123).random(len(panel)) < 0.4
    expected_keys = {(r.asset_id, r.week) for r, t in zip(panel.rows, expected) if t}
    assert {(r.asset_id, r.week) for r in test.rows} == expected_keys


def test_random_split_deterministic_per_seed():
    panel = grid_panel()
    t1 = split(panel, RandomRowSplit(seed=9))[1]
    t2 = split(panel, RandomRowSplit(seed=9))[1]
    t3 = split(panel, RandomRowSplit(seed=10))[1]
    assert [r.asset_id for r in t1.rows] == [r.asset_id for r in t2.rows]
    assert {(r.asset_id, r.week) for r in t1.rows} != {(r.asset_id, r.week) for r in t3.rows}


def test_chronological_split_is_pure():
    panel = grid_panel(n_weeks=20)
    train, test = split(panel, ChronologicalSplit(test_fraction=0.3))
    assert max(r.week for r in train.rows) < min(r.week for r in test.rows)


def test_chronological_boundary_favors_larger_test_side():
    # 10 uniform weeks, fraction 0.25: weeks >= 8 hold 20% (too few), so the
    # boundary falls back to week 7 and the test side gets 30%.
    panel = grid_panel(n_weeks=10)
    train, test = split(panel, ChronologicalSplit(test_fraction=0.25))
    assert min(r.week for r in test.rows) == 7
    assert len(test) / len(panel) == pytest.approx(0.3)


def test_chronological_exact_fraction_keeps_boundary():
    panel = grid_panel(n_weeks=10)
    _, test = split(panel, ChronologicalSplit(test_fraction=0.3))
    assert min(r.week for r in test.rows) == 7
    assert len(test) / len(panel) == pytest.approx(0.3)


def test_chronological_needs_two_weeks():
    rows = [PanelRow(f"V{i}", "bus", "u", 5, 1, 0, 0.0, i % 2) for i in range(4)]
    with pytest.raises(DegeneratePanelError):
        split(panel_from_rows(rows), ChronologicalSplit())


def test_split_preserves_start_monday():
    from datetime import date

    panel = grid_panel()
    panel.start_monday = date(2020, 1, 6)
    train, test = split(panel, ChronologicalSplit())
    assert train.start_monday == test.start_monday == date(2020, 1, 6)


def test_separation_ratio_hand_computed():
    preds = [0.8, 0.6, 0.1, 0.1, 0.2]
    labels = [1, 1, 0, 0, 0]
    report = separation_ratio(preds, labels)
    assert report.mean_pred_true == pytest.approx(0.7)
    assert report.mean_pred_false == pytest.approx(0.4 / 3)
    assert report.ratio == pytest.approx(0.7 / (0.4 / 3))
    assert report.n_test == 5


def test_separation_ratio_unit_for_identical_distributions():
    preds = np.full(100, 0.37)
    labels = np.r_[np.ones(50, dtype=int), np.zeros(50, dtype=int)]
    report = separation_ratio(preds, labels)
    assert report.ratio == pytest.approx(1.0)


def test_separation_ratio_histograms():
    preds = [0.005, 0.025, 0.995, 0.5]
    labels = [0, 0, 1, 1]
    report = separation_ratio(preds, labels)
    assert report.histogram_true.sum() == 2
    assert report.histogram_false.sum() == 2
    assert len(report.histogram_true) == len(report.histogram_false) == N_BINS
    assert report.histogram_false[0] == 1   # 0.005 -> [0.00, 0.02)
    assert report.histogram_false[1] == 1   # 0.025 -> [0.02, 0.04)
    assert report.histogram_true[-1] == 1   # 0.995 -> [0.98, 1.00]
    assert report.histogram_true[25] == 1   # 0.5 -> [0.50, 0.52)


def test_separation_ratio_rejects_degenerate_labels():
    with pytest.raises(SingleClassLabelsError):
        separation_ratio([0.1, 0.2], [1, 1])
    with pytest.raises(SingleClassLabelsError):
        separation_ratio([0.1, 0.2], [0, 0])
    with pytest.raises(ValueError):
        separation_ratio([0.1], [0, 1])


def test_separation_ratio_zero_false_mean():
    with pytest.raises(ZeroFalseMeanError):
        separation_ratio([0.5, 0.0], [1, 0])


def test_evaluate_split_end_to_end():
    panel = grid_panel(n_assets=8, n_weeks=30)
    report, model = evaluate_split(
        panel,
        FeatureSpec.of(["weeks_since_last_visit", "operational_weeks"]),
        "logistic",
        LogisticHyper(solver="newton"),
        ChronologicalSplit(test_fraction=0.3),
    )
    assert report.n_test > 0
    assert report.ratio > 0
    assert model.kind == "logistic"
    assert model.standardized


def test_ablation_shares_one_split():
    panel = grid_panel(n_assets=8, n_weeks=30)
    subsets = [
        FeatureSpec.of(["weeks_since_last_visit", "vehicle_type"]),
        FeatureSpec.of(["weeks_since_last_visit"]),
    ]
    rows = ablation(panel, subsets, "logistic", LogisticHyper(solver="newton"), ChronologicalSplit())
    assert [r.features for r in rows] == [
        ("vehicle_type", "weeks_since_last_visit"),
        ("weeks_since_last_visit",),
    ]
    for r in rows:
        assert r.ratio == pytest.approx(r.mean_pred_true / r.mean_pred_false)


def test_report_round_trips_to_dict():
    report = separation_ratio([0.9, 0.1, 0.2], [1, 0, 0])
    d = report_to_dict(report)
    assert d["n_bins"] == N_BINS
    assert d["ratio"] == report.ratio
    assert len(d["histogram_true"]) == N_BINS
    buf = io.StringIO()
    write_eval_report(report, buf)
    assert '"ratio"' in buf.getvalue()


def test_write_histogram_csv():
    report = separation_ratio([0.9, 0.1, 0.2], [1, 0, 0])
    buf = io.StringIO()
    write_histogram_csv(report.histogram_false, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "bin_low,bin_high,count"
    assert len(lines) == N_BINS + 1
    assert lines[1] == "0.00,0.02,0"
    assert lines[6] == "0.10,0.12,1"


def test_write_ablation_csv():
    panel = grid_panel(n_assets=8, n_weeks=30)
    rows = ablation(
        panel,
        [FeatureSpec.of(["weeks_since_last_visit"])],
        "logistic",
        LogisticHyper(solver="newton"),
        ChronologicalSplit(),
    )
    buf = io.StringIO()
    write_ablation_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "features,mean_pred_true,mean_pred_false,ratio"
    assert lines[1].startswith("weeks_since_last_visit,")
    assert float(lines[1].split(",")[3]) == pytest.approx(rows[0].ratio)
