"""On-disk formats: per-trial CSV files, the dataset manifest, and the W2F1 window file.

Dataset layout::

    <root>/manifest.json
    <root>/<user_id>/calib_rest.csv
    <root>/<user_id>/calib_mvc.csv
    <root>/<user_id>/<gesture_id>_r<rep>.csv
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..synthhand import FINGERS, GestureScript, JointAngles, SimulatorConfig, SyntheticSession, Trial, UserProfile
from .normalize import NormalizationSpec
from .windows import WindowSet

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
FLOAT_FORMAT = "%.12g"
WINDOW_MAGIC = b"W2F1"
WINDOW_VERSION = 1


class DatasetFormatError(ValueError):
    pass


def _imu_columns(device: str) -> list[str]:
    acc = [f"{device}_acc_{a}[m/s^2]" for a in "xyz"]
    rot = [f"{device}_rot_{i}{j}[1]" for i in range(3) for j in range(3)]
    return acc + rot


def trial_columns() -> list[str]:
    angles = [f"{f}_{j}[rad]" for f in FINGERS for j in ("flex1", "flex2", "flex3", "abd")]
    pose = [f"lm{k:02d}_{a}[cm]" for k in range(21) for a in "xyz"]
    force = [f"force_{f}[N]" for f in FINGERS]
    return ["timestamp[ms]"] + _imu_columns("ring") + _imu_columns("watch") + ["emg[mV]"] + angles + pose + force


N_COLUMNS = len(trial_columns())  # 1 + 12 + 12 + 1 + 20 + 63 + 5 = 114


def trial_matrix(trial: Trial) -> np.ndarray:
    n = len(trial)
    return np.concatenate([
        trial.timestamps_ms.reshape(n, 1).astype(float),
        trial.ring_imu,
        trial.watch_imu,
        trial.emg.reshape(n, 1),
        trial.angles.reshape(n, 20),
        trial.pose.reshape(n, 63),
        trial.force,
    ], axis=1)


def write_trial_csv(trial: Trial, path: Path) -> None:
    np.savetxt(path, trial_matrix(trial), fmt=FLOAT_FORMAT, delimiter=",", header=",".join(trial_columns()),
               comments="")


def read_trial_matrix(path: Path) -> np.ndarray:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header != trial_columns():
        raise DatasetFormatError(f"{path}: unexpected column header")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != N_COLUMNS:
        raise DatasetFormatError(f"{path}: expected {N_COLUMNS} columns, found {data.shape[1]}")
    return data


def trial_from_matrix(data: np.ndarray, script: GestureScript, repetition: int) -> Trial:
    n = len(data)
    cols = np.cumsum([0, 1, 12, 12, 1, 20, 63, 5])
    part = [data[:, a:b] for a, b in zip(cols[:-1], cols[1:])]
    return Trial(
        script=script,
        repetition=repetition,
        timestamps_ms=part[0][:, 0].astype(np.int64),
        angles=part[4].reshape(n, 5, 4),
        pose=part[5].reshape(n, 21, 3),
        force=part[6],
        ring_imu=part[1],
        watch_imu=part[2],
        emg=part[3][:, 0],
    )


def _script_dict(script: GestureScript) -> dict:
    return {
        "gesture_id": script.gesture_id,
        "duration_s": script.duration_s,
        "target_angles": script.target_angles.values.tolist(),
        "force_targets": script.force_targets.tolist(),
        "onset_s": script.onset_s,
        "offset_s": script.offset_s,
        "rest_s": script.rest_s,
        "tau_s": script.tau_s,
    }


def _script_from_dict(d: dict) -> GestureScript:
    d = dict(d)
    d["target_angles"] = JointAngles(np.array(d["target_angles"]))
    return GestureScript(**d)


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_dataset(sessions: list[SyntheticSession], root: Path, seed: int | None = None) -> dict:
    """Write all sessions under ``root`` and return the manifest (also saved as manifest.json)."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    users = []
    gestures: set[str] = set()
    for session in sessions:
        user_dir = root / session.user.user_id
        user_dir.mkdir(exist_ok=True)
        entries = []
        for role, trial in (("rest", session.rest_trial), ("mvc", session.mvc_trial)):
            path = user_dir / f"{trial.gesture_id}.csv"
            write_trial_csv(trial, path)
            entries.append({"role": role, "file": f"{session.user.user_id}/{path.name}", "repetition": 0,
                            "samples": len(trial), "sha256": _file_digest(path), "script": _script_dict(trial.script)})
        for trial in session.trials:
            path = user_dir / f"{trial.gesture_id}_r{trial.repetition}.csv"
            write_trial_csv(trial, path)
            gestures.add(trial.gesture_id)
            entries.append({"role": "gesture", "file": f"{session.user.user_id}/{path.name}",
                            "repetition": trial.repetition, "samples": len(trial), "sha256": _file_digest(path),
                            "script": _script_dict(trial.script)})
        users.append({"profile": asdict(session.user), "trials": entries})
    manifest = {
        "format": "ringwatch-dataset",
        "version": MANIFEST_VERSION,
        "seed": seed,
        "sample_rate_hz": 100,
        "columns": trial_columns(),
        "simulator": asdict(sessions[0].config) if sessions else {},
        "gestures": sorted(gestures),
        "n_users": len(sessions),
        "n_trials": sum(len(s.trials) for s in sessions),
        "users": users,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def read_manifest(root: Path) -> dict:
    path = Path(root) / MANIFEST_NAME
    if not path.is_file():
        raise DatasetFormatError(f"no {MANIFEST_NAME} in {root}")
    manifest = json.loads(path.read_text())
    if manifest.get("format") != "ringwatch-dataset" or manifest.get("version") != MANIFEST_VERSION:
        raise DatasetFormatError(f"{path}: unsupported manifest format")
    return manifest


def read_dataset(root: Path, users: list[str] | None = None) -> list[SyntheticSession]:
    root = Path(root)
    manifest = read_manifest(root)
    sim = manifest.get("simulator") or {}
    config = SimulatorConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in sim.items()})
    sessions = []
    for entry in manifest["users"]:
        profile = UserProfile(**entry["profile"])
        if users is not None and profile.user_id not in users:
            continue
        rest = mvc = None
        trials = []
        for t in entry["trials"]:
            trial = trial_from_matrix(read_trial_matrix(root / t["file"]), _script_from_dict(t["script"]),
                                      t["repetition"])
            if t["role"] == "rest":
                rest = trial
            elif t["role"] == "mvc":
                mvc = trial
            else:
                trials.append(trial)
        if rest is None or mvc is None:
            raise DatasetFormatError(f"user {profile.user_id} lacks calibration trials")
        sessions.append(SyntheticSession(profile, trials, rest, mvc, config))
    return sessions


# -- W2F1 windowed dataset -------------------------------------------------------------
# magic(4) | version u16 | reserved u16 | metadata length u32 | metadata JSON (utf-8)
# | imu, emg, pose, force, t_end as little-endian float64, C order

_HEADER = struct.Struct("<4sHHI")


def save_windows(windows: WindowSet, path: Path, norm: NormalizationSpec | None = None) -> None:
    meta = {
        "n": len(windows),
        "window": int(windows.imu.shape[1]),
        "imu_dim": int(windows.imu.shape[2]),
        "emg_dim": int(windows.emg.shape[2]),
        "user_ids": [str(u) for u in windows.user_ids],
        "gesture_ids": [str(g) for g in windows.gesture_ids],
        "repetitions": [int(r) for r in windows.repetitions],
        "normalization": (norm or NormalizationSpec()).to_dict(),
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(WINDOW_MAGIC, WINDOW_VERSION, 0, len(blob)))
        fh.write(blob)
        for arr in (windows.imu, windows.emg, windows.pose, windows.force, windows.t_end):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_windows(path: Path) -> tuple[WindowSet, NormalizationSpec]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"{path}: truncated header")
    magic, version, _, meta_len = _HEADER.unpack_from(raw)
    if magic != WINDOW_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != WINDOW_VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    offset = _HEADER.size + meta_len
    meta = json.loads(raw[_HEADER.size:offset])
    n, w = meta["n"], meta["window"]
    shapes = [(n, w, meta["imu_dim"]), (n, w, meta["emg_dim"]), (n, 21, 3), (n, 5), (n,)]
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(raw):
            raise DatasetFormatError(f"{path}: truncated data")
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float))
        offset = end
    if offset != len(raw):
        raise DatasetFormatError(f"{path}: trailing bytes")
    imu, emg, pose, force, t_end = arrays
    ws = WindowSet(imu, emg, pose, force, np.array(meta["user_ids"], dtype=str),
                   np.array(meta["gesture_ids"], dtype=str), np.array(meta["repetitions"], dtype=int), t_end)
    return ws, NormalizationSpec.from_dict(meta["normalization"])
