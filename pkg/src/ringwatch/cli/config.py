"""Run configuration: embedded defaults, YAML overrides, named profiles."""

from __future__ import annotations

import copy
from dataclasses import asdict, fields
from pathlib import Path

import yaml

from ..model import LossOptions, LossWeights, ModelConfig
from ..synthhand import SimulatorConfig
from ..train import TrainConfig


class ConfigKeyError(ValueError):
    pass


def _dataclass_defaults(cls) -> dict:
    d = asdict(cls())
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def default_config() -> dict:
    train = _dataclass_defaults(TrainConfig)
    train["loss_weights"] = asdict(LossWeights())
    train["loss_options"] = asdict(LossOptions())
    return {
        "seed": 0,
        "output_dir": "runs",
        "data": {"n_users": 20, "trials_per_gesture": 5, "gestures": None},
        "simulator": _dataclass_defaults(SimulatorConfig),
        "pipeline": {"window": 30, "step": 5, "split": "within-user"},
        "model": _dataclass_defaults(ModelConfig),
        "train": train,
        "stream": {
            "host": "127.0.0.1",
            "port": 8765,
            "speed": 1.0,
            "jitter_ms": 0.0,
            "drop_rate": 0.0,
            "queue_size": 1024,
            "step": 5,
            "stats_interval_s": 5.0,
        },
    }


PROFILES = {
    "default": {},
    "smoke": {
        "data": {"n_users": 3, "trials_per_gesture": 2,
                 "gestures": ["fist_clench", "point", "key_pinch", "open_stretch"]},
        "model": {"d_hidden": 16, "heads": 2, "lstm_layers": 1, "encoder_layers": 1, "cross_layers": 1},
        "train": {"max_epochs": 2, "finetune_epochs": 1, "batch_size": 64},
    },
}


def merge(base: dict, override: dict, path: str = "") -> dict:
    """Recursive merge that rejects keys missing from ``base``."""
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigKeyError(f"unknown config key '{where}'")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = merge(base[key], value, where + ".")
        elif isinstance(base[key], dict):
            raise ConfigKeyError(f"config key '{where}' must be a mapping")
        else:
            out[key] = value
    return out


def load_config(path: Path | None = None, profile: str = "default") -> dict:
    if profile not in PROFILES:
        raise ConfigKeyError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    cfg = merge(default_config(), PROFILES[profile])
    if path is not None:
        with open(path) as fh:
            user = yaml.safe_load(fh) or {}
        if not isinstance(user, dict):
            raise ConfigKeyError("config file must contain a mapping")
        cfg = merge(cfg, user)
    return cfg


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)


def simulator_config(cfg: dict) -> SimulatorConfig:
    sim = {k: tuple(v) if isinstance(v, list) else v for k, v in cfg["simulator"].items()}
    return SimulatorConfig(**sim)


def model_config(cfg: dict) -> ModelConfig:
    m = dict(cfg["model"])
    m["window"] = cfg["pipeline"]["window"]
    return ModelConfig.from_dict(m)


def train_config(cfg: dict) -> TrainConfig:
    t = dict(cfg["train"])
    known = {f.name for f in fields(TrainConfig)}
    t = {k: v for k, v in t.items() if k in known}
    t["loss_weights"] = LossWeights(**t["loss_weights"])
    t["loss_options"] = LossOptions(**t["loss_options"])
    t["finetune_components"] = tuple(t["finetune_components"])
    if t.get("seed") is None:
        t["seed"] = cfg["seed"]
    return TrainConfig(**t)
