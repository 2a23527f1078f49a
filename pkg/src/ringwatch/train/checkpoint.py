"""W2FM checkpoint files.

Layout (little-endian)::

    magic "W2FM" | version u16 | reserved u16 | header length u32
    header JSON: model config, normalization spec, tensor table, free-form metadata
    tensor data: float64, in table order
    crc32 u32 over everything before it
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..model import ModelConfig, RingWatchNet
from ..pipeline import NormalizationSpec

MAGIC = b"W2FM"
VERSION = 1
_HEADER = struct.Struct("<4sHHI")


class CheckpointError(ValueError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


def save_checkpoint(model: RingWatchNet, path: Path, norm: NormalizationSpec = NormalizationSpec(),
                    meta: dict | None = None) -> Path:
    path = Path(path)
    state = model.state_arrays()
    table = []
    offset = 0
    for name, arr in state.items():
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
    header = json.dumps({
        "config": model.config.to_dict(),
        "normalization": norm.to_dict(),
        "tensors": table,
        "meta": meta or {},
    }, sort_keys=True).encode()
    body = _HEADER.pack(MAGIC, VERSION, 0, len(header)) + header
    body += b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in state.values())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    return path


def read_checkpoint(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise CorruptCheckpointError(f"{path}: file too short ({len(raw)} bytes)")
    magic, version, _, header_len = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointVersionError(f"{path}: checkpoint version {version}, expected {VERSION}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    start = _HEADER.size + header_len
    if start > len(body):
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(body[_HEADER.size:start])
    except ValueError as exc:
        raise CorruptCheckpointError(f"{path}: unreadable header") from exc
    n_values = sum(int(np.prod(t["shape"])) for t in header["tensors"])
    if len(body) - start != 8 * n_values:
        raise CorruptCheckpointError(f"{path}: expected {8 * n_values} data bytes, found {len(body) - start}")
    if zlib.crc32(body) != crc:
        raise CorruptCheckpointError(f"{path}: checksum mismatch")
    data = np.frombuffer(body, dtype="<f8", offset=start, count=n_values)
    state = {}
    for t in header["tensors"]:
        n = int(np.prod(t["shape"]))
        state[t["name"]] = data[t["offset"]:t["offset"] + n].reshape(t["shape"]).astype(float)
    return header, state


def load_checkpoint(path: Path) -> tuple[RingWatchNet, NormalizationSpec, dict]:
    """Returns (model, normalization spec, metadata)."""
    header, state = read_checkpoint(path)
    model = RingWatchNet(ModelConfig.from_dict(header["config"]))
    try:
        model.load_state_arrays(state)
    except ValueError as exc:
        raise CorruptCheckpointError(f"{path}: {exc}") from exc
    return model, NormalizationSpec.from_dict(header["normalization"]), header.get("meta", {})
