"""Wire protocol, two-device synchronization, streaming inference and replay."""

from .features import EMG_RMS_FRAMES, OnlineFeaturizer, featurize_frames
from .packet import (
    PACKET_SIZE,
    RING,
    WATCH,
    PacketCrcError,
    PacketDeviceError,
    PacketError,
    PacketLengthError,
    PacketMagicError,
    PacketQuaternionError,
    PacketVersionError,
    SensorPacket,
    decode_packet,
    decode_packets,
    encode_packet,
    encode_packets,
    quat_to_rotation,
    rotation_to_quat,
)
from .replay import (
    DEVICE_HZ,
    ScheduledPacket,
    device_stream,
    file_source,
    paced,
    replay_schedule,
    samples_from_schedule,
    send_over_socket,
    socket_source,
    write_packet_file,
)
from .server import (
    BoundedQueue,
    LatencyStats,
    Prediction,
    ServerStats,
    StreamServer,
    emission_points,
    forces_newton,
    nearest_rank,
    offline_predictions,
)
from .sync import FRAME_MS, MAX_HOLD, TOLERANCE_MS, Sample, SyncedFrame, Synchronizer, sample_from_packet, synchronize

__all__ = [
    "BoundedQueue",
    "DEVICE_HZ",
    "EMG_RMS_FRAMES",
    "FRAME_MS",
    "LatencyStats",
    "MAX_HOLD",
    "OnlineFeaturizer",
    "PACKET_SIZE",
    "PacketCrcError",
    "PacketDeviceError",
    "PacketError",
    "PacketLengthError",
    "PacketMagicError",
    "PacketQuaternionError",
    "PacketVersionError",
    "Prediction",
    "RING",
    "Sample",
    "ScheduledPacket",
    "SensorPacket",
    "ServerStats",
    "StreamServer",
    "SyncedFrame",
    "Synchronizer",
    "TOLERANCE_MS",
    "WATCH",
    "decode_packet",
    "decode_packets",
    "device_stream",
    "emission_points",
    "encode_packet",
    "encode_packets",
    "featurize_frames",
    "file_source",
    "forces_newton",
    "nearest_rank",
    "offline_predictions",
    "paced",
    "quat_to_rotation",
    "replay_schedule",
    "rotation_to_quat",
    "sample_from_packet",
    "samples_from_schedule",
    "send_over_socket",
    "socket_source",
    "synchronize",
    "write_packet_file",
]
