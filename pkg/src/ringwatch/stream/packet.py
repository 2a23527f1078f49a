"""64-byte little-endian sensor packet.

    offset  size  field
    0       2     magic "W2"
    2       1     version (1)
    3       1     device (0 ring, 1 watch)
    4       4     seq, u32
    8       8     timestamp_us, u64
    16      12    accel xyz, 3 x f32 (m/s^2)
    28      16    orientation quaternion w, x, y, z, 4 x f32
    44      4     EMG, f32 (mV; ring sends 0)
    48      12    reserved, zero
    60      4     crc32 (zlib polynomial) over bytes 0..59

Decode checks run in the order length, magic, version, crc, device,
quaternion norm; each failure has its own exception class and code.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

PACKET_SIZE = 64
MAGIC = b"W2"
VERSION = 1
RING = 0
WATCH = 1
QUAT_NORM_TOL = 0.01

_BODY = struct.Struct("<2sBBIQ3f4ff12x")
_CRC = struct.Struct("<I")
assert _BODY.size + _CRC.size == PACKET_SIZE

PACKET_DTYPE = np.dtype([
    ("magic", "S2"), ("version", "u1"), ("device", "u1"), ("seq", "<u4"), ("timestamp_us", "<u8"),
    ("accel", "<f4", (3,)), ("quat", "<f4", (4,)), ("emg", "<f4"), ("reserved", "V12"), ("crc", "<u4"),
])
assert PACKET_DTYPE.itemsize == PACKET_SIZE


class PacketError(ValueError):
    code = 0


class PacketLengthError(PacketError):
    code = 1


class PacketMagicError(PacketError):
    code = 2


class PacketVersionError(PacketError):
    code = 3


class PacketCrcError(PacketError):
    code = 4


class PacketDeviceError(PacketError):
    code = 5


class PacketQuaternionError(PacketError):
    code = 6


@dataclass
class SensorPacket:
    device: int
    seq: int
    timestamp_us: int
    accel: tuple
    quat: tuple  # (w, x, y, z)
    emg: float = 0.0

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_rotation(np.asarray(self.quat, dtype=float))


def quat_to_rotation(q: np.ndarray) -> np.ndarray:
    """(..., 4) quaternions (w, x, y, z), normalized first, to (..., 3, 3) rotation matrices."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack([
        np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
        np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
        np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
    ], -2)


def rotation_to_quat(r: np.ndarray) -> np.ndarray:
    """(..., 3, 3) -> (..., 4) unit quaternion with w >= 0."""
    r = np.asarray(r, dtype=float)
    xyzw = Rotation.from_matrix(r.reshape(-1, 3, 3)).as_quat()
    q = np.concatenate([xyzw[:, 3:], xyzw[:, :3]], axis=1)
    q *= np.where(q[:, :1] < 0, -1.0, 1.0)
    return q.reshape(r.shape[:-2] + (4,))


def encode_packet(p: SensorPacket) -> bytes:
    if p.device not in (RING, WATCH):
        raise PacketDeviceError(f"unknown device {p.device}")
    body = _BODY.pack(MAGIC, VERSION, p.device, p.seq, p.timestamp_us, *p.accel, *p.quat, p.emg)
    return body + _CRC.pack(zlib.crc32(body))


def decode_packet(buf: bytes) -> SensorPacket:
    if len(buf) != PACKET_SIZE:
        raise PacketLengthError(f"packet must be {PACKET_SIZE} bytes, got {len(buf)}")
    fields = _BODY.unpack_from(buf)
    if fields[0] != MAGIC:
        raise PacketMagicError(f"bad magic {fields[0]!r}")
    if fields[1] != VERSION:
        raise PacketVersionError(f"unsupported version {fields[1]}")
    if _CRC.unpack_from(buf, 60)[0] != zlib.crc32(buf[:60]):
        raise PacketCrcError("crc mismatch")
    device = fields[2]
    if device not in (RING, WATCH):
        raise PacketDeviceError(f"unknown device {device}")
    quat = fields[8:12]
    norm = float(np.sqrt(sum(c * c for c in quat)))
    if abs(norm - 1.0) > QUAT_NORM_TOL:
        raise PacketQuaternionError(f"quaternion norm {norm:.4f} outside [0.99, 1.01]")
    return SensorPacket(device, fields[3], fields[4], fields[5:8], quat, fields[12])


def encode_packets(device, seq, timestamp_us, accel, quat, emg) -> bytes:
    """Vectorized encoder for N packets; array arguments broadcast to length N."""
    seq = np.asarray(seq)
    n = len(seq)
    rec = np.zeros(n, dtype=PACKET_DTYPE)
    rec["magic"] = MAGIC
    rec["version"] = VERSION
    rec["device"] = device
    rec["seq"] = seq
    rec["timestamp_us"] = timestamp_us
    rec["accel"] = accel
    rec["quat"] = quat
    rec["emg"] = emg
    raw = bytearray(rec.tobytes())
    view = memoryview(raw)
    for i in range(0, n * PACKET_SIZE, PACKET_SIZE):
        _CRC.pack_into(raw, i + 60, zlib.crc32(view[i:i + 60]))
    return bytes(raw)


def decode_packets(buf: bytes) -> np.ndarray:
    """Vectorized decoder; returns the structured records or raises on the first bad packet."""
    if len(buf) % PACKET_SIZE:
        raise PacketLengthError(f"stream length {len(buf)} is not a multiple of {PACKET_SIZE}")
    rec = np.frombuffer(buf, dtype=PACKET_DTYPE)
    if np.any(rec["magic"] != MAGIC):
        raise PacketMagicError(f"bad magic in packet {int(np.argmax(rec['magic'] != MAGIC))}")
    if np.any(rec["version"] != VERSION):
        raise PacketVersionError(f"unsupported version in packet {int(np.argmax(rec['version'] != VERSION))}")
    view = memoryview(buf)
    for i, crc in enumerate(rec["crc"].tolist()):
        if zlib.crc32(view[i * PACKET_SIZE:i * PACKET_SIZE + 60]) != crc:
            raise PacketCrcError(f"crc mismatch in packet {i}")
    if np.any(rec["device"] > WATCH):
        raise PacketDeviceError("unknown device id")
    norm = np.linalg.norm(rec["quat"].astype(float), axis=1)
    if np.any(np.abs(norm - 1.0) > QUAT_NORM_TOL):
        raise PacketQuaternionError("quaternion norm outside [0.99, 1.01]")
    return rec
