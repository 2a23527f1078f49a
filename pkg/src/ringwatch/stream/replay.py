"""Replay client: turns a recorded 100 Hz trial into paced 55 Hz packets from both devices."""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..synthhand import Trial
from .packet import PACKET_SIZE, RING, WATCH, decode_packet, encode_packets, rotation_to_quat
from .sync import Sample, sample_from_packet

DEVICE_HZ = 55.0


@dataclass
class ScheduledPacket:
    send_s: float
    device: int
    data: bytes


def _interp(t_ms: np.ndarray, src_ms: np.ndarray, values: np.ndarray) -> np.ndarray:
    values = values.reshape(len(src_ms), -1)
    return np.stack([np.interp(t_ms, src_ms, values[:, j]) for j in range(values.shape[1])], axis=1)


def device_stream(trial: Trial, device: int, rate_hz: float = DEVICE_HZ, jitter_ms: float = 0.0,
                  rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(timestamps_us, accel (n,3), quat (n,4), emg (n,)) sampled at ``rate_hz`` over the trial."""
    src_ms = trial.timestamps_ms.astype(float)
    n = int(np.floor(src_ms[-1] / 1000.0 * rate_hz + 1e-9)) + 1
    t_ms = np.arange(n) * (1000.0 / rate_hz)
    if jitter_ms > 0:
        rng = rng or np.random.default_rng(0)
        t_ms = t_ms + rng.normal(0.0, jitter_ms, size=n)
        t_ms = np.clip(t_ms, src_ms[0], src_ms[-1])
        t_ms = np.maximum.accumulate(t_ms)
        t_ms[1:] = np.maximum(t_ms[1:], t_ms[:-1] + 1e-3)
    imu = trial.ring_imu if device == RING else trial.watch_imu
    vals = _interp(t_ms, src_ms, imu)
    rot = vals[:, 3:12].reshape(-1, 3, 3)
    u, _, vt = np.linalg.svd(rot)
    quat = rotation_to_quat(u @ vt)
    emg = np.interp(t_ms, src_ms, trial.emg) if device == WATCH else np.zeros(n)
    ts_us = np.round(t_ms * 1000.0).astype(np.uint64)
    return ts_us, vals[:, :3], quat, emg


def replay_schedule(trial: Trial, speed: float = 1.0, rate_hz: float = DEVICE_HZ, jitter_ms: float = 0.0,
                    drop_rate: float = 0.0, seed: int = 0) -> list[ScheduledPacket]:
    """Packets for both devices ordered by send time (sample time / speed).

    Sequence numbers count every generated sample, so dropped packets leave gaps in ``seq``.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    rng = np.random.default_rng(seed)
    out = []
    for device in (RING, WATCH):
        ts_us, accel, quat, emg = device_stream(trial, device, rate_hz, jitter_ms, rng)
        data = encode_packets(device, np.arange(len(ts_us), dtype=np.uint32), ts_us, accel, quat, emg)
        keep = rng.random(len(ts_us)) >= drop_rate
        for i in np.flatnonzero(keep):
            out.append(ScheduledPacket(ts_us[i] / 1e6 / speed, device, data[i * PACKET_SIZE:(i + 1) * PACKET_SIZE]))
    out.sort(key=lambda p: (p.send_s, p.device))
    return out


def paced(schedule: list[ScheduledPacket], realtime: bool = True, clock=time.monotonic,
          sleep=time.sleep) -> Iterator[bytes]:
    """Yield packet bytes, sleeping to honour send times when ``realtime``."""
    start = clock()
    for p in schedule:
        if realtime:
            delay = p.send_s - (clock() - start)
            if delay > 0:
                sleep(delay)
        yield p.data


def samples_from_schedule(schedule: list[ScheduledPacket]) -> tuple[list[Sample], list[Sample]]:
    """Decode a schedule straight into per-device samples (for offline synchronization)."""
    ring, watch = [], []
    for p in schedule:
        pkt = decode_packet(p.data)
        (ring if pkt.device == RING else watch).append(sample_from_packet(pkt))
    return ring, watch


# -- transports ----------------------------------------------------------------------------


def write_packet_file(packets: Iterable[bytes], path: Path) -> int:
    n = 0
    with open(path, "wb") as fh:
        for data in packets:
            fh.write(data)
            n += 1
    return n


def file_source(path: Path, chunk: int = 64 * PACKET_SIZE) -> Iterator[bytes]:
    with open(path, "rb") as fh:
        while True:
            data = fh.read(chunk)
            if not data:
                return
            yield data


def socket_source(conn: socket.socket, chunk: int = 4096) -> Iterator[bytes]:
    while True:
        data = conn.recv(chunk)
        if not data:
            return
        yield data


def send_over_socket(packets: Iterable[bytes], host: str, port: int, timeout: float = 5.0) -> int:
    n = 0
    with socket.create_connection((host, port), timeout=timeout) as sock:
        for data in packets:
            sock.sendall(data)
            n += 1
    return n
