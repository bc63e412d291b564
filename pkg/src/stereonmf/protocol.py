"""Wire protocol for the live service: JSON control, binary telemetry.

Control flows client to server as JSON text frames and is acknowledged
exactly once per message.  Telemetry flows server to client as binary
frames so the per-frame float arrays do not pay JSON encoding costs.

Binary layout (everything little-endian), documented in docs/protocol.md
and mirrored by the browser client:

    header (16 bytes, all frame kinds):
        u32 magic       0x464d4e53 ("SNMF" as bytes)
        u32 version     1
        u32 frame_index
        u16 kind        1 = telemetry snapshot, 2 = audio
        u16 flags       bit 0: file source wrapped around this frame

    kind 1 body:
        u32 tau_index
        f32 latency_ms
        f32 frame_time_us
        u32 n_tdoa   (K)
        u32 n_atoms  (D)
        u32 n_bins   (F)
        f32[K] angular spectrum
        f32[D] atom mask
        f32[F] channel-averaged gains

    kind 2 body:
        u16 channels
        u16 reserved (0)
        u32 samples_per_channel
        s16[channels * samples] interleaved PCM
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MAGIC",
    "VERSION",
    "KIND_TELEMETRY",
    "KIND_AUDIO",
    "FLAG_LOOPED",
    "CONTROL_KINDS",
    "LOCALIZER_MODES",
    "ProtocolError",
    "ControlMessage",
    "TelemetryPacket",
    "AudioPacket",
    "encode_telemetry",
    "decode_telemetry",
    "encode_audio",
    "decode_audio",
    "parse_control",
    "encode_control",
    "encode_ack",
    "encode_hello",
]

MAGIC = 0x464D4E53  # b"SNMF" read as little-endian u32
VERSION = 1
KIND_TELEMETRY = 1
KIND_AUDIO = 2
FLAG_LOOPED = 0x0001

_HEADER = struct.Struct("<IIIHH")
_TELEMETRY_FIXED = struct.Struct("<IffIII")
_AUDIO_FIXED = struct.Struct("<HHI")

CONTROL_KINDS = frozenset(
    {
        "set_mask_params",
        "set_tdoa_override",
        "clear_tdoa_override",
        "set_localizer",
        "set_dictionary",
    }
)
LOCALIZER_MODES = frozenset({"accumulated", "sliding", "offline"})
_MASK_KEYS = frozenset(
    {"epsilon", "alpha", "beta", "eta", "mode", "coefficient_mode"}
)


class ProtocolError(ValueError):
    """Malformed or mismatched wire data."""


@dataclass
class ControlMessage:
    msg_id: int
    kind: str
    payload: dict


@dataclass
class TelemetryPacket:
    frame_index: int
    tau_index: int
    latency_ms: float
    frame_time_us: float
    looped: bool
    angular: np.ndarray  # float32, (K,)
    mask: np.ndarray  # float32, (D,)
    gains: np.ndarray  # float32, (F,)


@dataclass
class AudioPacket:
    frame_index: int
    channels: int
    samples: np.ndarray  # int16, (channels, n)


def _f32(x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.float32).ravel())


def encode_telemetry(frame_index, tau_index, angular, mask, gains,
                     latency_ms, frame_time_us, looped=False):
    angular, mask, gains = _f32(angular), _f32(mask), _f32(gains)
    flags = FLAG_LOOPED if looped else 0
    head = _HEADER.pack(MAGIC, VERSION, frame_index, KIND_TELEMETRY, flags)
    fixed = _TELEMETRY_FIXED.pack(
        tau_index, latency_ms, frame_time_us,
        angular.size, mask.size, gains.size,
    )
    return b"".join(
        (head, fixed, angular.tobytes(), mask.tobytes(), gains.tobytes())
    )


def _check_header(data, expect_kind=None):
    if len(data) < _HEADER.size:
        raise ProtocolError(f"frame too short for header: {len(data)} bytes")
    magic, version, frame_index, kind, flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic 0x{magic:08x}")
    if version != VERSION:
        raise ProtocolError(f"unsupported protocol version {version}")
    if expect_kind is not None and kind != expect_kind:
        raise ProtocolError(f"expected frame kind {expect_kind}, got {kind}")
    return frame_index, kind, flags


def decode_telemetry(data):
    frame_index, _, flags = _check_header(data, expect_kind=KIND_TELEMETRY)
    off = _HEADER.size
    if len(data) < off + _TELEMETRY_FIXED.size:
        raise ProtocolError("telemetry frame truncated before array sizes")
    tau_index, latency_ms, frame_time_us, k, d, f = \
        _TELEMETRY_FIXED.unpack_from(data, off)
    off += _TELEMETRY_FIXED.size
    need = off + 4 * (k + d + f)
    if len(data) != need:
        raise ProtocolError(
            f"telemetry frame is {len(data)} bytes, layout requires {need}"
        )
    arrays = []
    for count in (k, d, f):
        arrays.append(
            np.frombuffer(data, dtype="<f4", count=count, offset=off).copy()
        )
        off += 4 * count
    angular, mask, gains = arrays
    return TelemetryPacket(
        frame_index=frame_index,
        tau_index=tau_index,
        latency_ms=latency_ms,
        frame_time_us=frame_time_us,
        looped=bool(flags & FLAG_LOOPED),
        angular=angular,
        mask=mask,
        gains=gains,
    )


def encode_audio(frame_index, samples, looped=False):
    """Interleaved s16 PCM; input float is clipped to [-1, 1]."""
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise ProtocolError("audio payload must be (channels, samples)")
    if samples.dtype != np.int16:
        scaled = np.clip(samples, -1.0, 1.0) * 32767.0
        samples = np.round(scaled).astype(np.int16)
    flags = FLAG_LOOPED if looped else 0
    head = _HEADER.pack(MAGIC, VERSION, frame_index, KIND_AUDIO, flags)
    fixed = _AUDIO_FIXED.pack(samples.shape[0], 0, samples.shape[1])
    interleaved = np.ascontiguousarray(samples.T)
    return b"".join((head, fixed, interleaved.tobytes()))


def decode_audio(data):
    frame_index, _, _ = _check_header(data, expect_kind=KIND_AUDIO)
    off = _HEADER.size
    if len(data) < off + _AUDIO_FIXED.size:
        raise ProtocolError("audio frame truncated before sample counts")
    channels, _, n = _AUDIO_FIXED.unpack_from(data, off)
    off += _AUDIO_FIXED.size
    need = off + 2 * channels * n
    if len(data) != need:
        raise ProtocolError(
            f"audio frame is {len(data)} bytes, layout requires {need}"
        )
    flat = np.frombuffer(data, dtype="<i2", count=channels * n, offset=off)
    return AudioPacket(
        frame_index=frame_index,
        channels=channels,
        samples=flat.reshape(n, channels).T.copy(),
    )


def _validate_payload(kind, payload):
    if kind == "set_mask_params":
        unknown = set(payload) - _MASK_KEYS
        if unknown:
            raise ProtocolError(
                f"unknown mask parameter(s): {sorted(unknown)}"
            )
        if not payload:
            raise ProtocolError("set_mask_params payload is empty")
    elif kind == "set_tdoa_override":
        idx = payload.get("tdoa_index")
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
            raise ProtocolError(
                "set_tdoa_override needs a non-negative integer tdoa_index"
            )
    elif kind == "clear_tdoa_override":
        if payload:
            raise ProtocolError("clear_tdoa_override takes no payload")
    elif kind == "set_localizer":
        mode = payload.get("mode")
        if mode not in LOCALIZER_MODES:
            raise ProtocolError(
                f"localizer mode must be one of {sorted(LOCALIZER_MODES)}"
            )
        extra = set(payload) - {"mode", "window_frames"}
        if extra:
            raise ProtocolError(f"unknown localizer field(s): {sorted(extra)}")
        if "window_frames" in payload:
            wf = payload["window_frames"]
            if not isinstance(wf, int) or isinstance(wf, bool) or wf < 1:
                raise ProtocolError("window_frames must be a positive integer")
    elif kind == "set_dictionary":
        path = payload.get("path")
        if not isinstance(path, str) or not path:
            raise ProtocolError("set_dictionary needs a non-empty path string")


def parse_control(text):
    """Validate a JSON control frame; raises ProtocolError with the reason."""
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProtocolError(f"control frame is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError("control frame must be a JSON object")
    msg_id = obj.get("msg_id")
    if not isinstance(msg_id, int) or isinstance(msg_id, bool) or msg_id < 0:
        raise ProtocolError("msg_id must be a non-negative integer")
    kind = obj.get("kind")
    if kind not in CONTROL_KINDS:
        raise ProtocolError(f"unknown control kind {kind!r}")
    payload = obj.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be a JSON object")
    _validate_payload(kind, payload)
    return ControlMessage(msg_id=msg_id, kind=kind, payload=payload)


def encode_control(msg_id, kind, payload=None):
    return json.dumps(
        {"msg_id": msg_id, "kind": kind, "payload": payload or {}}
    )


def encode_ack(msg_id, status, reason=None):
    """status is "applied" or "rejected"; rejected acks carry the reason."""
    obj = {"kind": "ack", "msg_id": msg_id, "status": status}
    if reason is not None:
        obj["reason"] = reason
    return json.dumps(obj)


def encode_hello(config, looped=False):
    """Session-opening text frame describing the running engine."""
    window = config.window
    return json.dumps(
        {
            "kind": "hello",
            "protocol_version": VERSION,
            "fs": config.fs,
            "frame_size": window.frame_size,
            "hop": window.hop,
            "latency_ms": 1000.0 * (window.span + window.hop) / config.fs,
            "n_tdoa": config.grid.n_tdoa,
            "n_atoms": config.dictionary.n_atoms,
            "n_bins": config.dictionary.bins,
            "tdoa_values": [float(v) for v in config.grid.values],
            "mask": config.mask.to_dict(),
            "localizer_mode": config.localizer_mode,
            "tdoa_override": config.tdoa_override,
            "looped_source": bool(looped),
        }
    )
