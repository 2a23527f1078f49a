"""Three-stage streaming inference: ingest/decode -> synchronize -> infer/emit.

Stages are threads joined by bounded queues. With ``overflow="drop_oldest"``
a full queue discards its oldest item and counts the drop; ``"block"`` makes
the producer wait instead (used for lossless file replay).
"""

from __future__ import annotations

import json
import logging
import math
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..model import RingWatchNet
from ..pipeline import STEP, CalibrationProfile, NormalizationSpec, denormalize_force, window_count
from ..tensorgrad import no_grad
from .features import OnlineFeaturizer, featurize_frames
from .packet import MAGIC, PACKET_SIZE, PacketError, PacketMagicError, decode_packet
from .sync import Synchronizer, SyncedFrame, sample_from_packet

logger = logging.getLogger(__name__)

_END = object()


class BoundedQueue:
    def __init__(self, maxsize: int, overflow: str = "drop_oldest"):
        if maxsize < 1:
            raise ValueError("queue size must be >= 1")
        if overflow not in ("drop_oldest", "block"):
            raise ValueError(f"unknown overflow policy {overflow!r}")
        self.maxsize = maxsize
        self.overflow = overflow
        self.items: deque = deque()
        self.cond = threading.Condition()
        self.dropped = 0

    def put(self, item) -> None:
        with self.cond:
            if item is not _END:
                if self.overflow == "block":
                    while len(self.items) >= self.maxsize:
                        self.cond.wait()
                elif len(self.items) >= self.maxsize:
                    self.items.popleft()
                    self.dropped += 1
            self.items.append(item)
            self.cond.notify_all()

    def get(self):
        with self.cond:
            while not self.items:
                self.cond.wait()
            item = self.items.popleft()
            self.cond.notify_all()
            return item


def nearest_rank(sorted_values: list[float], p: float) -> float:
    k = max(1, math.ceil(p / 100.0 * len(sorted_values)))
    return sorted_values[k - 1]


@dataclass
class LatencyStats:
    samples: list[float] = field(default_factory=list)

    def add(self, ms: float) -> None:
        self.samples.append(float(ms))

    def __len__(self) -> int:
        return len(self.samples)

    def summary(self) -> dict:
        if not self.samples:
            raise ValueError("no latency samples recorded")
        s = sorted(self.samples)
        return {"n": len(s), "p50": nearest_rank(s, 50), "p95": nearest_rank(s, 95), "max": s[-1]}

    @property
    def p50(self) -> float:
        return self.summary()["p50"]

    @property
    def p95(self) -> float:
        return self.summary()["p95"]

    @property
    def max(self) -> float:
        return self.summary()["max"]


@dataclass
class Prediction:
    t_ms: float
    frame: int
    pose_cm: list
    force_n: list
    latency_ms: float
    inference_ms: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), separators=(",", ":"))


def forces_newton(force_norm: np.ndarray, norm: NormalizationSpec) -> np.ndarray:
    return np.maximum(denormalize_force(force_norm, norm), 0.0)


def emission_points(n_frames: int, window: int, step: int = STEP) -> list[int]:
    """Indices of the last frame of every window (same count as offline windowing)."""
    return [window - 1 + k * step for k in range(window_count(n_frames, window, step))]


def offline_predictions(frames: list[SyncedFrame], model: RingWatchNet, norm: NormalizationSpec,
                        calibration: CalibrationProfile, step: int = STEP) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Batch path over a complete frame list: (last frame position, pose, force N) per valid window."""
    if not frames:
        return []
    w = model.config.window
    imu, emg = featurize_frames(frames, calibration)
    valid = np.array([f.valid for f in frames])
    ends = [e for e in emission_points(len(frames), w, step) if valid[e - w + 1:e + 1].all()]
    if not ends:
        return []
    idx = np.array(ends)[:, None] + np.arange(-w + 1, 1)[None, :]
    with no_grad():
        out = model(imu[idx], emg[idx])
    forces = forces_newton(out.force.data, norm)
    return [(e, out.pose.data[i], forces[i]) for i, e in enumerate(ends)]


@dataclass
class ServerStats:
    packets: int = 0
    decode_errors: dict = field(default_factory=dict)
    frames: int = 0
    invalid_windows: int = 0
    predictions: int = 0
    dropped_packets: int = 0
    dropped_frames: int = 0
    latency: LatencyStats = field(default_factory=LatencyStats)
    inference: LatencyStats = field(default_factory=LatencyStats)

    def summary(self) -> dict:
        d = {k: getattr(self, k) for k in ("packets", "decode_errors", "frames", "invalid_windows", "predictions",
                                           "dropped_packets", "dropped_frames")}
        if len(self.latency):
            d["latency_ms"] = self.latency.summary()
            d["inference_ms"] = self.inference.summary()
        return d


class StreamServer:
    def __init__(self, model: RingWatchNet, norm: NormalizationSpec, calibration: CalibrationProfile,
                 step: int = STEP, on_prediction: Callable[[Prediction], None] | None = None,
                 queue_size: int = 1024, overflow: str = "drop_oldest", clock=time.monotonic):
        if step < 1:
            raise ValueError("step must be >= 1")
        self.model = model
        self.norm = norm
        self.calibration = calibration
        self.step = step
        self.on_prediction = on_prediction
        self.queue_size = queue_size
        self.overflow = overflow
        self.clock = clock
        self.stats = ServerStats()
        self.predictions: list[Prediction] = []
        self.frames: list[SyncedFrame] = []

    # stage 1
    def _ingest(self, source: Iterable[bytes], out: BoundedQueue) -> None:
        buf = bytearray()
        try:
            for chunk in source:
                buf.extend(chunk)
                while len(buf) >= PACKET_SIZE:
                    raw = bytes(buf[:PACKET_SIZE])
                    try:
                        packet = decode_packet(raw)
                    except PacketMagicError as exc:
                        self._count_error(exc)
                        nxt = buf.find(MAGIC, 1)
                        del buf[:nxt if nxt > 0 else len(buf)]
                        continue
                    except PacketError as exc:
                        self._count_error(exc)
                        del buf[:PACKET_SIZE]
                        continue
                    del buf[:PACKET_SIZE]
                    self.stats.packets += 1
                    out.put((packet, self.clock()))
        except Exception:
            logger.exception("input transport failed")
        finally:
            out.put(_END)

    def _count_error(self, exc: PacketError) -> None:
        name = type(exc).__name__
        self.stats.decode_errors[name] = self.stats.decode_errors.get(name, 0) + 1

    # stage 2
    def _synchronize(self, inp: BoundedQueue, out: BoundedQueue) -> None:
        sync = Synchronizer()
        while True:
            item = inp.get()
            if item is _END:
                break
            packet, received = item
            for frame in sync.push(packet.device, sample_from_packet(packet, received)):
                out.put(frame)
        for frame in sync.flush():
            out.put(frame)
        out.put(_END)

    # stage 3
    def _infer(self, inp: BoundedQueue) -> None:
        w = self.model.config.window
        feats = OnlineFeaturizer(self.calibration)
        imu_buf: deque = deque(maxlen=w)
        emg_buf: deque = deque(maxlen=w)
        valid_buf: deque = deque(maxlen=w)
        n = 0
        while True:
            frame = inp.get()
            if frame is _END:
                break
            self.frames.append(frame)
            imu_row, emg_row = feats.push(frame)
            imu_buf.append(imu_row)
            emg_buf.append(emg_row)
            valid_buf.append(frame.valid)
            n += 1
            self.stats.frames = n
            if n < w or (n - w) % self.step:
                continue
            if not all(valid_buf):
                self.stats.invalid_windows += 1
                continue
            try:
                self._predict(frame, n - 1, np.stack(imu_buf), np.stack(emg_buf))
            except Exception:
                logger.exception("inference failed at frame %d", n - 1)

    def _predict(self, frame: SyncedFrame, position: int, imu: np.ndarray, emg: np.ndarray) -> None:
        t0 = self.clock()
        with no_grad():
            out = self.model(imu[None], emg[None])
        pose = out.pose.data[0]
        force = forces_newton(out.force.data[0], self.norm)
        done = self.clock()
        pred = Prediction(
            t_ms=frame.source_ms,
            frame=position,
            pose_cm=pose.reshape(63).tolist(),
            force_n=force.tolist(),
            latency_ms=(done - frame.received) * 1000.0,
            inference_ms=(done - t0) * 1000.0,
        )
        self.stats.latency.add(pred.latency_ms)
        self.stats.inference.add(pred.inference_ms)
        self.stats.predictions += 1
        self.predictions.append(pred)
        if self.on_prediction:
            self.on_prediction(pred)

    def run(self, source: Iterable[bytes]) -> ServerStats:
        """Serve one input stream until it ends; blocks until all stages drain."""
        packets = BoundedQueue(self.queue_size, self.overflow)
        frames = BoundedQueue(self.queue_size, self.overflow)
        threads = [
            threading.Thread(target=self._ingest, args=(source, packets), name="ingest", daemon=True),
            threading.Thread(target=self._synchronize, args=(packets, frames), name="sync", daemon=True),
            threading.Thread(target=self._infer, args=(frames,), name="infer", daemon=True),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        self.stats.dropped_packets += packets.dropped
        self.stats.dropped_frames += frames.dropped
        return self.stats
