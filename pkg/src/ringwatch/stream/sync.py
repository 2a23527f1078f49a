"""Two-device timestamp alignment onto a 30 Hz grid.

The grid starts at the later of the two devices' first timestamps. Tick k
(time t0 + k * 1000/30 ms) is resolved per device once that device has
delivered a sample at or after the tick: the nearest of the last sample before
and the first sample at/after is taken if it lies within +-17 ms. Otherwise
the previous value is held; a frame that needed more than ``max_hold``
consecutive holds for a device is marked invalid. If one device falls silent,
ticks that the other device has passed by ``stall_ms`` are resolved with the
silent device treated as missing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .packet import RING, WATCH, SensorPacket, quat_to_rotation

FRAME_MS = 1000.0 / 30.0
TOLERANCE_MS = 17.0
MAX_HOLD = 3
STALL_MS = 100.0


@dataclass
class Sample:
    t_ms: float
    features: np.ndarray  # accel 3 + rotation 9
    emg: float
    received: float = 0.0  # wall-clock receipt (s)


def sample_from_packet(p: SensorPacket, received: float = 0.0) -> Sample:
    feats = np.concatenate([np.asarray(p.accel, dtype=float), quat_to_rotation(np.asarray(p.quat)).reshape(9)])
    return Sample(p.timestamp_us / 1000.0, feats, float(p.emg), received)


@dataclass
class SyncedFrame:
    index: int
    t_ms: float
    ring: np.ndarray  # (12,)
    watch: np.ndarray  # (12,)
    emg: float
    valid: bool = True
    held: tuple = (False, False)
    source_ms: float = 0.0  # newest contributing sample timestamp
    received: float = 0.0  # receipt time of that newest sample


@dataclass
class _DeviceState:
    pending: deque = field(default_factory=deque)
    before: Sample | None = None  # last sample earlier than the next unresolved tick
    last_value: Sample | None = None
    holds: int = 0
    newest_ms: float = -np.inf
    first_ms: float | None = None


class Synchronizer:
    def __init__(self, frame_ms: float = FRAME_MS, tolerance_ms: float = TOLERANCE_MS, max_hold: int = MAX_HOLD,
                 stall_ms: float = STALL_MS):
        self.frame_ms = frame_ms
        self.tolerance_ms = tolerance_ms
        self.max_hold = max_hold
        self.stall_ms = stall_ms
        self.devices = {RING: _DeviceState(), WATCH: _DeviceState()}
        self.t0: float | None = None
        self.next_tick = 0
        self.late_samples = 0
        self.gaps = 0
        self.invalid_frames = 0

    def tick_time(self, k: int) -> float:
        return self.t0 + k * self.frame_ms

    def push(self, device: int, sample: Sample) -> list[SyncedFrame]:
        """Add one sample; returns the frames that became resolvable."""
        st = self.devices[device]
        if sample.t_ms <= st.newest_ms:
            self.late_samples += 1
            return []
        st.newest_ms = sample.t_ms
        if st.first_ms is None:
            st.first_ms = sample.t_ms
        st.pending.append(sample)
        if self.t0 is None:
            firsts = [d.first_ms for d in self.devices.values()]
            if any(f is None for f in firsts):
                return []
            self.t0 = max(firsts)
        return self._drain(final=False)

    def flush(self) -> list[SyncedFrame]:
        """Resolve every tick up to the newest sample seen (end of stream)."""
        if self.t0 is None:
            return []
        return self._drain(final=True)

    def _resolvable(self, t: float, final: bool) -> bool:
        newest = [d.newest_ms for d in self.devices.values()]
        if all(n >= t for n in newest):
            return True
        if max(newest) >= t + self.stall_ms:
            return True
        return final and max(newest) >= t

    def _pick(self, st: _DeviceState, t: float) -> Sample | None:
        while st.pending and st.pending[0].t_ms < t:
            st.before = st.pending.popleft()
        after = st.pending[0] if st.pending else None
        best = None
        for cand in (st.before, after):
            if cand is not None and abs(cand.t_ms - t) <= self.tolerance_ms:
                if best is None or abs(cand.t_ms - t) < abs(best.t_ms - t):
                    best = cand
        return best

    def _drain(self, final: bool) -> list[SyncedFrame]:
        frames = []
        while True:
            t = self.tick_time(self.next_tick)
            if not self._resolvable(t, final):
                break
            values = {}
            held = []
            valid = True
            for dev in (RING, WATCH):
                st = self.devices[dev]
                s = self._pick(st, t)
                if s is None:
                    self.gaps += 1
                    st.holds += 1
                    held.append(True)
                    if st.last_value is None or st.holds > self.max_hold:
                        valid = False
                    s = st.last_value
                else:
                    st.holds = 0
                    st.last_value = s
                    held.append(False)
                values[dev] = s
            if values[RING] is None or values[WATCH] is None:
                # nothing to hold yet; skip the tick entirely
                self.next_tick += 1
                continue
            if not valid:
                self.invalid_frames += 1
            newest = max((values[RING], values[WATCH]), key=lambda s: s.t_ms)
            frames.append(SyncedFrame(self.next_tick, t, values[RING].features, values[WATCH].features,
                                      values[WATCH].emg, valid, tuple(held), newest.t_ms,
                                      max(values[RING].received, values[WATCH].received)))
            self.next_tick += 1
        return frames


def synchronize(ring: list[Sample], watch: list[Sample], **kwargs) -> list[SyncedFrame]:
    """Offline helper: merge two sample lists by timestamp and run the synchronizer over them."""
    sync = Synchronizer(**kwargs)
    events = sorted([(s.t_ms, RING, s) for s in ring] + [(s.t_ms, WATCH, s) for s in watch], key=lambda e: e[:2])
    frames = []
    for _, dev, s in events:
        frames.extend(sync.push(dev, s))
    frames.extend(sync.flush())
    return frames
