import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ringwatch.evalkit import (
    ABLATION_COLUMNS,
    REPORT_COLUMNS,
    AblationSpec,
    LeakageError,
    MetricsError,
    MetricsReport,
    angle_diff,
    check_no_leakage,
    emit_report,
    force_metrics,
    mean_pose_baseline,
    mean_row,
    metrics_report,
    mpjpe,
    pearson,
    run_ablations,
    run_louo,
)
from ringwatch.model import LossWeights, ModelConfig
from ringwatch.pipeline import DatasetSplit, split, windows_from_sessions
from ringwatch.synthhand import FINGERS, HandSkeleton, forward_kinematics, generate_dataset
from ringwatch.train import TrainConfig

TINY_MODEL = ModelConfig(d_hidden=8, heads=2, encoder_layers=1, lstm_layers=1, cross_layers=1)
TINY_TRAIN = TrainConfig(batch_size=64, max_epochs=1, finetune_epochs=1, val_fraction=0.0)


@pytest.fixture(scope="module")
def windows():
    return windows_from_sessions(generate_dataset(3, 2, seed=2, gestures=("point", "fist_clench")))


def random_pose(seed):
    rng = np.random.default_rng(seed)
    angles = np.zeros((5, 4))
    angles[:, :3] = rng.uniform(0.1, 1.3, size=(5, 3))
    return forward_kinematics(angles, HandSkeleton())


# -- pose metrics ----------------------------------------------------------------------------


def test_mpjpe_identity_and_shift():
    p = random_pose(0)
    assert mpjpe(p, p) == 0.0
    assert mpjpe(p + [1.0, 0.0, 0.0], p) == pytest.approx(1.0, abs=1e-12)


def test_mpjpe_hand_summed_oracle():
    a, b = random_pose(1), random_pose(2)
    total = 0.0
    for j in range(21):
        total += math.sqrt(sum((a[j][k] - b[j][k]) ** 2 for k in range(3)))
    assert abs(mpjpe(a, b) - total / 21) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-20, 20)))
def test_mpjpe_uniform_translation(t):
    p = random_pose(3)
    assert mpjpe(p + t, p) == pytest.approx(float(np.linalg.norm(t)), abs=1e-9)


def test_mpjpe_shape_mismatch():
    with pytest.raises(MetricsError):
        mpjpe(np.zeros((21, 3)), np.zeros((20, 3)))


def test_angle_diff_identity_and_single_joint():
    p = random_pose(4)
    assert angle_diff(p, p) == 0.0
    straight = forward_kinematics(np.zeros((5, 4)), HandSkeleton())
    bent_angles = np.zeros((5, 4))
    bent_angles[2, 1] = math.pi / 2
    bent = forward_kinematics(bent_angles, HandSkeleton())
    assert angle_diff(bent, straight) == pytest.approx(6.0, abs=1e-9)


def test_angle_diff_matches_injected_offsets():
    rng = np.random.default_rng(5)
    base = np.zeros((5, 4))
    base[1:, :3] = rng.uniform(0.35, 1.2, size=(4, 3))
    offsets = rng.uniform(-0.3, 0.3, size=(4, 3))
    moved = base.copy()
    moved[1:, :3] += offsets
    sk = HandSkeleton()
    expected = np.degrees(np.abs(offsets).sum() / 15)
    assert abs(angle_diff(forward_kinematics(moved, sk), forward_kinematics(base, sk)) - expected) < 1e-6


def test_mean_pose_baseline():
    train = np.stack([random_pose(i) for i in range(4)])
    test = np.stack([random_pose(i) for i in range(4, 7)])
    assert mean_pose_baseline(train, test) == pytest.approx(mpjpe(np.broadcast_to(train.mean(0), test.shape), test))


# -- force metrics ---------------------------------------------------------------------------


def test_force_metrics_perfect_and_anticorrelated():
    gt = np.random.default_rng(0).normal(size=(50, 5))
    m = force_metrics(gt, gt)
    assert m.rmse == 0.0 and m.mae == 0.0 and m.pearson == pytest.approx(1.0, abs=1e-12)
    centered = gt - gt.mean(axis=0)
    assert force_metrics(-centered, centered).pearson == pytest.approx(-1.0, abs=1e-12)


def test_force_metrics_definitional_oracle():
    rng = np.random.default_rng(1)
    pred, gt = rng.uniform(size=(100, 5)), rng.uniform(size=(100, 5))
    m = force_metrics(pred, gt)
    rs, rmses, maes = [], [], []
    for i in range(5):
        x, y = list(pred[:, i]), list(gt[:, i])
        mx, my = sum(x) / 100, sum(y) / 100  # first pass: means
        sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))  # second pass: moments
        sxx = sum((a - mx) ** 2 for a in x)
        syy = sum((b - my) ** 2 for b in y)
        rs.append(sxy / math.sqrt(sxx * syy))
        rmses.append(math.sqrt(sum((a - b) ** 2 for a, b in zip(x, y)) / 100))
        maes.append(sum(abs(a - b) for a, b in zip(x, y)) / 100)
        assert abs(m.fingers[FINGERS[i]].pearson - rs[-1]) <= 1e-12
    assert abs(m.pearson - sum(rs) / 5) <= 1e-12
    assert abs(m.rmse - sum(rmses) / 5) <= 1e-12
    assert abs(m.mae - sum(maes) / 5) <= 1e-12


def test_constant_series_is_degenerate():
    r, flag = pearson(np.ones(10), np.arange(10.0))
    assert r == 0.0 and flag
    gt = np.random.default_rng(2).normal(size=(10, 5))
    pred = gt.copy()
    pred[:, 3] = 0.5
    assert force_metrics(pred, gt).fingers["ring"].degenerate


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 20, elements=st.floats(-1e3, 1e3)))
def test_pearson_self_is_one(x):
    if np.ptp(x) < 1e-3:
        return
    r, flag = pearson(x, x)
    assert not flag and abs(r - 1.0) <= 1e-12


def test_force_metrics_needs_two_samples():
    with pytest.raises(MetricsError):
        force_metrics(np.zeros((1, 5)), np.zeros((1, 5)))
    with pytest.raises(MetricsError):
        force_metrics(np.zeros((4, 4)), np.zeros((4, 4)))


# -- harness ---------------------------------------------------------------------------------


def test_leakage_detected(windows):
    bad = DatasetSplit(windows, windows.subset(np.arange(3)), "leave-one-user-out", "u00")
    with pytest.raises(LeakageError):
        check_no_leakage(bad)
    for fold in split(windows, "louo"):
        check_no_leakage(fold)


def test_ablation_weights():
    base = LossWeights()
    assert AblationSpec("no_emg").loss_weights(base) == LossWeights(0.5, 0.0, 1.0)
    assert AblationSpec("no_imu").loss_weights(base) == LossWeights(0.0, 0.5, 1.0)
    assert AblationSpec("no_cross_attention").loss_weights(base) == base
    with pytest.raises(ValueError):
        AblationSpec("no_force")


def test_louo_rows_and_mean(windows):
    result = run_louo(windows, TINY_MODEL, TINY_TRAIN)
    assert [r.user_id for r in result.rows] == ["u00", "u01", "u02"]
    assert len(result.all_rows) == 4 and result.all_rows[-1].label == "mean"
    for key in ("mpjpe_cm", "angle_diff_deg", "force_rmse", "force_mae", "force_pearson"):
        assert abs(getattr(result.mean, key) - sum(getattr(r, key) for r in result.rows) / 3) <= 1e-12
    assert set(result.baselines) == {"u00", "u01", "u02"}


def test_ablations_emit_four_rows(windows):
    (sp,) = split(windows, "within-user")
    reports = run_ablations(sp, TINY_MODEL, TINY_TRAIN)
    assert [r.variant for r in reports] == ["full", "no_emg", "no_imu", "no_cross_attention"]


def test_mean_row_arithmetic():
    rows = [MetricsReport(f"r{i}", i, 2 * i, 3 * i, 4 * i, 0.1 * i, n_windows=10) for i in range(1, 4)]
    m = mean_row(rows)
    assert (m.mpjpe_cm, m.angle_diff_deg, m.n_windows) == (2.0, 4.0, 30)


# -- reports ---------------------------------------------------------------------------------


def reports():
    rng = np.random.default_rng(3)
    out = []
    for i, variant in enumerate(("full", "no_emg", "no_imu")):
        gt_pose = np.stack([random_pose(k) for k in range(6)])
        pose = gt_pose + rng.normal(0, 0.2, gt_pose.shape)
        gt_force = rng.uniform(size=(6, 5))
        out.append(metrics_report(f"run{i}", pose, gt_force + rng.normal(0, 0.1, (6, 5)), gt_pose, gt_force,
                                  variant=variant, user_id=f"u0{i}"))
    return out


def test_report_tables(tmp_path):
    rs = reports()
    files = emit_report(rs, tmp_path)
    assert {f.name for f in files} == {"metrics.csv", "per_finger.jsonl", "per_user.jsonl", "ablation.csv"}
    rows = list(csv.reader(open(tmp_path / "metrics.csv")))
    assert rows[0] == list(REPORT_COLUMNS) and len(rows) == 4
    assert float(rows[1][REPORT_COLUMNS.index("force_pearson")]) == rs[0].force_pearson
    ablation = list(csv.reader(open(tmp_path / "ablation.csv")))
    assert ablation[0] == ABLATION_COLUMNS and [r[0] for r in ablation[1:]] == ["full", "no_emg", "no_imu"]
    series = [json.loads(line) for line in open(tmp_path / "per_finger.jsonl")]
    assert len(series) == 9 and series[0]["x"] == list(FINGERS)
    users = [json.loads(line) for line in open(tmp_path / "per_user.jsonl")]
    assert users[0]["x"] == ["u00", "u01", "u02"]


def test_reports_are_byte_identical(tmp_path):
    emit_report(reports(), tmp_path / "a")
    emit_report(reports(), tmp_path / "b")
    for name in ("metrics.csv", "per_finger.jsonl", "per_user.jsonl", "ablation.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_empty_report_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_report([], tmp_path)
