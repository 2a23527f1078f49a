import json
import math
import struct

import numpy as np
import pytest

from ringwatch.model import ModelConfig, build
from ringwatch.pipeline import NormalizationSpec, windows_from_sessions
from ringwatch.synthhand import generate_dataset
from ringwatch.tensorgrad import Tensor, no_grad
from ringwatch.train import (
    AdamState,
    CheckpointError,
    CheckpointVersionError,
    CorruptCheckpointError,
    TrainConfig,
    TrainingError,
    adam_step,
    clip_grad_norm,
    evaluate_loss,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
    split_validation,
    train_model,
    train_stage,
)

SMALL = ModelConfig(d_hidden=8, heads=2, encoder_layers=1, lstm_layers=1, cross_layers=1)
FAST = TrainConfig(batch_size=32, max_epochs=3, finetune_epochs=2, seed=3)


@pytest.fixture(scope="module")
def windows():
    sessions = generate_dataset(2, 2, seed=1, gestures=("point", "fist_clench", "key_pinch", "mug_wrap"))
    return windows_from_sessions(sessions)


# -- optimizer -------------------------------------------------------------------------------


def test_adam_zero_gradient_leaves_parameters():
    p = Tensor(np.array([1.0, -2.0, 3.0]))
    adam_step([p], [np.zeros(3)], AdamState(), lr=0.1)
    np.testing.assert_array_equal(p.data, [1.0, -2.0, 3.0])
    adam_step([p], [None], AdamState(), lr=0.1)
    np.testing.assert_array_equal(p.data, [1.0, -2.0, 3.0])


def test_adam_first_step_closed_form():
    g = np.array([0.5, -3.0, 1e-3, -40.0])
    p = np.zeros(4)
    lr, eps = 1e-3, 1e-8
    adam_step([p], [g], AdamState(), lr=lr, eps=eps)
    # m_hat = g, v_hat = g^2 after bias correction
    np.testing.assert_allclose(p, -lr * g / (np.abs(g) + eps), rtol=1e-12, atol=0)
    np.testing.assert_allclose(p, -lr * np.sign(g), rtol=1e-4)


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step([np.zeros(3)], [np.zeros(4)], AdamState(), lr=0.1)


def test_clip_grad_norm():
    grads = [np.array([3.0, 0.0]), np.array([[4.0]])]
    assert clip_grad_norm(grads, 1.0) == 5.0
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    assert total == pytest.approx(1.0, abs=1e-9)
    small = [np.array([0.1])]
    clip_grad_norm(small, 1.0)
    assert small[0][0] == 0.1


# -- config ----------------------------------------------------------------------------------


def test_train_config_defaults_and_guards():
    cfg = TrainConfig()
    assert (cfg.batch_size, cfg.lr_main, cfg.lr_finetune) == (256, 1e-3, 1e-4)
    assert cfg.finetune_components == ("pose_decoder", "emg_encoder")
    for bad in ({"batch_size": 0}, {"lr_finetune": 1e-2}, {"val_fraction": 1.0}, {"finetune_components": ["x"]},
                {"lr_factor": 1.5}, {"max_epochs": 0}):
        with pytest.raises(TrainingError):
            TrainConfig(**bad)
    assert TrainConfig(loss_weights={"imu": 0.1, "emg": 0.2, "angle": 0.3}).loss_weights.emg == 0.2


# -- training --------------------------------------------------------------------------------


def test_validation_holds_out_whole_trials(windows):
    train, val = split_validation(windows, 0.25, seed=0)
    assert not set(train.trial_keys.tolist()) & set(val.trial_keys.tolist())
    assert len(train) + len(val) == len(windows)
    assert split_validation(windows, 0.0, 0)[1] is None


def test_epoch_zero_loss_is_deterministic(windows):
    def run():
        model = build(SMALL)
        model.set_pose_stats(windows.pose)
        return train_stage(model, windows, FAST, max_epochs=1).epochs[0].train

    assert run() == run()


def test_freeze_keeps_other_components(windows):
    model = build(SMALL)
    model.set_pose_stats(windows.pose)
    frozen = {n: p.data.copy() for n, p in model.named_parameters() if not n.startswith("pose_decoder")}
    tuned = {n: p.data.copy() for n, p in model.named_parameters() if n.startswith("pose_decoder")}
    train_stage(model, windows, FAST, trainable=("pose_decoder",), lr=1e-3, max_epochs=2)
    for n, p in model.named_parameters():
        if n in frozen:
            np.testing.assert_array_equal(p.data, frozen[n])
    assert any(not np.array_equal(p.data, tuned[n]) for n, p in model.named_parameters() if n in tuned)


def test_schedule_and_best_checkpoint(windows):
    train, val = split_validation(windows, 0.25, seed=0)
    cfg = TrainConfig(batch_size=32, max_epochs=8, patience_lr=1, early_stop_patience=3, lr_main=3e-2,
                      lr_finetune=1e-4, seed=0)
    model = build(SMALL)
    model.set_pose_stats(train.pose)
    report = train_stage(model, train, cfg, val=val)
    lrs = [e.lr for e in report.epochs]
    assert all(b <= a for a, b in zip(lrs, lrs[1:]))
    vals = [e.val["total"] for e in report.epochs]
    assert report.best_val == min(vals) and vals[report.best_epoch] == min(vals)
    restored = evaluate_loss(model, val, cfg)["total"]
    assert restored == pytest.approx(report.best_val, rel=1e-12)


def test_empty_training_set(windows):
    with pytest.raises(TrainingError):
        train_stage(build(SMALL), windows.subset(np.array([], dtype=int)), FAST)


def test_train_model_writes_outputs(tmp_path, windows):
    model = build(SMALL)
    lines = []
    reports = train_model(model, windows, FAST, tmp_path, log=lines.append)
    assert [r.stage for r in reports] == ["stage1", "stage2"]
    assert len(reports[0].epochs) == 3 and len(reports[1].epochs) == 2
    assert reports[1].trainable == ["pose_decoder", "emg_encoder"]
    assert (tmp_path / "model.w2fm").is_file()
    saved = json.loads((tmp_path / "train_report.json").read_text())
    assert saved[0]["stage"] == "stage1"
    assert lines[0].startswith("stage1 epoch=0 ") and "train[total=" in lines[0] and "val[" in lines[0]


def test_training_reduces_loss(windows):
    model = build(SMALL)
    cfg = TrainConfig(batch_size=16, max_epochs=6, seed=0, val_fraction=0.0)
    report = train_model(model, windows, cfg, stages=("stage1",))[0]
    assert report.epochs[-1].train["total"] < report.epochs[0].train["total"]


# -- checkpoints -----------------------------------------------------------------------------


def test_checkpoint_round_trip_bit_identical(tmp_path, windows):
    model = build(SMALL)
    model.set_pose_stats(windows.pose)
    norm = NormalizationSpec(force_max=math.log(30.0))
    path = save_checkpoint(model, tmp_path / "m.w2fm", norm, {"note": "x"})
    loaded, norm2, meta = load_checkpoint(path)
    assert norm2 == norm and meta == {"note": "x"} and loaded.config == SMALL
    idx = np.arange(10)
    with no_grad():
        a = model(windows.imu[idx], windows.emg[idx]).numpy()
        b = loaded(windows.imu[idx], windows.emg[idx]).numpy()
    for k in a:
        assert a[k].tobytes() == b[k].tobytes()


def test_checkpoint_corruption(tmp_path):
    path = save_checkpoint(build(SMALL), tmp_path / "m.w2fm")
    raw = path.read_bytes()
    cases = {
        "truncated": (raw[: len(raw) // 2], CorruptCheckpointError),
        "tiny": (raw[:6], CorruptCheckpointError),
        "flipped": (raw[:-20] + bytes([raw[-20] ^ 0xFF]) + raw[-19:], CorruptCheckpointError),
        "magic": (b"NOPE" + raw[4:], CheckpointError),
        "version": (raw[:4] + struct.pack("<H", 7) + raw[6:], CheckpointVersionError),
    }
    for name, (data, err) in cases.items():
        bad = tmp_path / f"{name}.w2fm"
        bad.write_bytes(data)
        with pytest.raises(err):
            load_checkpoint(bad)
    header, state = read_checkpoint(path)
    assert header["config"]["d_hidden"] == 8 and "buffer.pose_mean" in state


def test_resume_is_deterministic(tmp_path, windows):
    model = build(SMALL)
    train_model(model, windows, FAST, tmp_path, stages=("stage1",))

    def next_epoch():
        resumed, _, _ = load_checkpoint(tmp_path / "model.w2fm")
        return train_stage(resumed, windows, FAST, max_epochs=1).epochs[0].train

    assert next_epoch() == next_epoch()
