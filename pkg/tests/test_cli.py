import json
import subprocess
import sys

import pytest
import yaml

from ringwatch.cli import PROFILES, ConfigKeyError, default_config, load_config, main, merge

SUBCOMMANDS = ["generate", "preprocess", "train", "eval", "louo", "ablate", "serve", "replay", "plot-data", "config"]
SMOKE = ["--profile", "smoke"]


def run(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["generate", *SMOKE, "--out", str(data), "--gestures", "point,fist_clench"]) == 0
    assert main(["train", *SMOKE, "--data", str(data), "--out", str(root / "run")]) == 0
    return root


# -- parser ----------------------------------------------------------------------------------


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_every_subcommand_has_help(capsys, name):
    code, out, _ = run(capsys, name, "--help")
    assert code == 0 and "--profile" in out and "--seed" in out


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "bogus")[0] == 1
    assert run(capsys, "generate")[0] == 1  # --out missing
    assert run(capsys, "generate", "--out", "x", "--bogus")[0] == 1
    assert run(capsys, "train", "--data", "x", "--profile", "huge")[0] == 1


def test_generate_refuses_non_empty_directory(capsys, tmp_path):
    (tmp_path / "keep.txt").write_text("x")
    code, _, err = run(capsys, "generate", *SMOKE, "--out", str(tmp_path))
    assert code == 1 and "not empty" in err


def test_unknown_gesture_is_usage_error(capsys, tmp_path):
    assert run(capsys, "generate", *SMOKE, "--out", str(tmp_path / "d"), "--gestures", "wave")[0] == 1


# -- config ----------------------------------------------------------------------------------


def test_config_dump_round_trips(capsys):
    code, out, _ = run(capsys, "config", "dump", *SMOKE, "--seed", "9")
    cfg = yaml.safe_load(out)
    assert code == 0 and cfg["seed"] == 9 and cfg["model"]["seed"] == 9 and cfg["train"]["seed"] == 9
    assert cfg["model"]["d_hidden"] == 16
    assert cfg["train"]["loss_weights"] == {"imu": 0.5, "emg": 0.5, "angle": 1.0}


def test_unknown_config_key_exits_one(capsys, tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("model:\n  width: 3\n")
    code, _, err = run(capsys, "config", "dump", "--config", str(bad))
    assert code == 1 and "model.width" in err


def test_merge_rules():
    base = default_config()
    assert merge(base, {"train": {"lr_main": 0.01}})["train"]["lr_main"] == 0.01
    assert base["train"]["lr_main"] == 1e-3
    with pytest.raises(ConfigKeyError):
        merge(base, {"nope": 1})
    with pytest.raises(ConfigKeyError):
        merge(base, {"model": 3})
    assert set(PROFILES) == {"default", "smoke"}


def test_yaml_overrides_profile(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("train:\n  max_epochs: 5\n")
    cfg = load_config(path, "smoke")
    assert cfg["train"]["max_epochs"] == 5 and cfg["model"]["d_hidden"] == 16


# -- pipeline commands -----------------------------------------------------------------------


def test_generate_is_seed_deterministic(capsys, tmp_path):
    args = ["generate", *SMOKE, "--gestures", "point", "--users", "2", "--reps", "1", "--seed", "4"]
    assert run(capsys, *args, "--out", str(tmp_path / "a"))[0] == 0
    assert run(capsys, *args, "--out", str(tmp_path / "b"))[0] == 0
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["n_users"] == 2 and manifest["n_trials"] == 2


def test_train_outputs(dataset):
    run_dir = dataset / "run"
    assert (run_dir / "model.w2fm").is_file() and (run_dir / "train_report.json").is_file()
    log = (run_dir / "train.log").read_text().splitlines()
    assert log[0].startswith("stage1 epoch=0 ")
    assert any(line.startswith("stage2 ") for line in log)


def test_train_header_reports_loss_weights(capsys, dataset, tmp_path):
    code, out, _ = run(capsys, "train", *SMOKE, "--data", str(dataset / "data"), "--out", str(tmp_path),
                       "--stage", "stage1")
    assert code == 0
    assert out.splitlines()[0].startswith("run seed=0 lambda=(0.5, 0.5, 1.0) d_hidden=16 heads=2")
    assert "final validation" in out


def test_preprocess_writes_windows_and_calibration(capsys, dataset):
    code, out, _ = run(capsys, "preprocess", *SMOKE, "--data", str(dataset / "data"))
    assert code == 0
    assert (dataset / "data" / "windows.w2f").is_file()
    cal = json.loads((dataset / "data" / "calibration" / "u00.json").read_text())
    assert cal["emg_mvc_level"] > cal["emg_rest_level"] > 0


def test_eval_is_byte_identical(capsys, dataset):
    ckpt = str(dataset / "run" / "model.w2fm")
    outs = []
    for name in ("e1", "e2"):
        code, out, _ = run(capsys, "eval", *SMOKE, "--data", str(dataset / "data"), "--checkpoint", ckpt,
                           "--out", str(dataset / name))
        assert code == 0 and "baseline_mpjpe_cm=" in out
        outs.append((dataset / name / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]
    code, _, _ = run(capsys, "plot-data", "--metrics", str(dataset / "e1" / "metrics.csv"), "--out",
                     str(dataset / "p"))
    assert code == 0 and (dataset / "p" / "metrics.csv").read_bytes() == outs[0]


def test_data_errors_exit_two(capsys, dataset, tmp_path):
    assert run(capsys, "eval", "--data", str(dataset / "data"), "--checkpoint", str(tmp_path / "none.w2fm"),
               "--out", str(tmp_path))[0] == 2
    assert run(capsys, "train", "--data", str(tmp_path / "missing"), "--out", str(tmp_path))[0] == 2
    bad = tmp_path / "bad.w2fm"
    bad.write_bytes(b"W2FMjunk")
    assert run(capsys, "eval", "--data", str(dataset / "data"), "--checkpoint", str(bad), "--out",
               str(tmp_path))[0] == 2
    # checkpoint trained with the smoke model cannot resume under the default model size
    code, _, err = run(capsys, "train", "--data", str(dataset / "data"), "--out", str(tmp_path / "r"),
                       "--resume", str(dataset / "run" / "model.w2fm"))
    assert code == 2 and "d_hidden" in err


def test_replay_then_serve_from_file(capsys, dataset):
    packets = dataset / "p.bin"
    code, out, _ = run(capsys, "replay", *SMOKE, "--data", str(dataset / "data"), "--user", "u01",
                       "--trial", "point_r0", "--out", str(packets))
    assert code == 0 and out.startswith("sent ") and "(u01/point_r0)" in out
    preds = dataset / "preds.jsonl"
    code, _, err = run(capsys, "serve", "--checkpoint", str(dataset / "run" / "model.w2fm"), "--data",
                       str(dataset / "data"), "--user", "u01", "--input", str(packets), "--output", str(preds))
    assert code == 0 and "final predictions=" in err and "inference_ms p50=" in err
    lines = [json.loads(line) for line in preds.read_text().splitlines()]
    assert lines and len(lines[0]["pose_cm"]) == 63 and len(lines[0]["force_n"]) == 5


def test_serve_needs_calibration(capsys, dataset):
    code, _, err = run(capsys, "serve", "--checkpoint", str(dataset / "run" / "model.w2fm"), "--input", "x")
    assert code == 1 and "calibration" in err


def test_replay_unknown_trial(capsys, dataset):
    assert run(capsys, "replay", "--data", str(dataset / "data"), "--trial", "wave_r9", "--out", "x.bin")[0] == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ringwatch.cli.main", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ringwatch ")
