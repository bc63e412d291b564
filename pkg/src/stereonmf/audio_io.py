"""WAV file ingestion/emission and dictionary persistence.

The WAV side handles RIFF files carrying 16-bit PCM or 32-bit IEEE float,
mono or stereo, and nothing else; the stdlib ``wave`` module covers neither
float payloads nor the error distinctions callers need (malformed container
vs codec we refuse vs file cut short), so the chunk walk is done here.

Dictionaries persist as a little-endian container: a 4-byte header length,
a JSON header, then the atom matrix as float32 column-major bytes.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .nmf import Dictionary

DICTIONARY_MAGIC = "nmf-dictionary"
DICTIONARY_VERSION = 1

__all__ = [
    "AudioBuffer",
    "WavError",
    "MalformedWavError",
    "UnsupportedCodecError",
    "TruncatedWavError",
    "DictionaryError",
    "DictionaryFormatError",
    "DictionaryInvariantError",
    "read_wav",
    "write_wav",
    "save_dictionary",
    "load_dictionary",
]


class WavError(Exception):
    """Base for WAV parsing failures."""


class MalformedWavError(WavError):
    """Not a parseable RIFF/WAVE container."""


class UnsupportedCodecError(WavError):
    """Valid container, but a codec/layout this engine does not accept."""


class TruncatedWavError(WavError):
    """Container declares more payload than the file holds."""


class DictionaryError(Exception):
    """Base for dictionary container failures."""


class DictionaryFormatError(DictionaryError):
    """Unreadable or structurally inconsistent dictionary file."""


class DictionaryInvariantError(DictionaryError):
    """Well-formed file whose payload violates dictionary invariants."""


@dataclass
class AudioBuffer:
    """Float32 samples, shape (channels, frames), one row per channel."""

    samples: np.ndarray
    fs: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float32))
        if self.samples.ndim != 2:
            raise ValueError(f"samples must be 2-D, got {self.samples.shape}")
        if self.samples.shape[0] not in (1, 2):
            raise ValueError(
                f"only mono and stereo supported, got {self.samples.shape[0]} channels"
            )
        if self.fs <= 0:
            raise ValueError(f"sample rate must be positive, got {self.fs}")

    @property
    def channels(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def duration(self):
        return self.n_samples / self.fs


def _iter_chunks(blob, offset):
    while offset + 8 <= len(blob):
        tag = blob[offset : offset + 4]
        (size,) = struct.unpack_from("<I", blob, offset + 4)
        yield tag, offset + 8, size
        offset += 8 + size + (size & 1)  # chunks are word-aligned


def read_wav(path):
    """Parse a PCM16 or IEEE-float32 RIFF file into an AudioBuffer."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12 or blob[:4] != b"RIFF" or blob[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    data = None
    for tag, start, size in _iter_chunks(blob, 12):
        if tag == b"fmt " and fmt is None:
            if size < 16 or start + 16 > len(blob):
                raise MalformedWavError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", blob, start)
        elif tag == b"data" and data is None:
            data = (start, size)
    if fmt is None or data is None:
        raise MalformedWavError(f"{path}: missing fmt or data chunk")

    audio_format, channels, fs, _byte_rate, block_align, bits = fmt
    if channels not in (1, 2):
        raise UnsupportedCodecError(f"{path}: {channels} channels")
    if (audio_format, bits) == (1, 16):
        dtype, scale = np.dtype("<i2"), 1.0 / 32768.0
    elif (audio_format, bits) == (3, 32):
        dtype, scale = np.dtype("<f4"), None
    else:
        raise UnsupportedCodecError(
            f"{path}: format tag {audio_format} / {bits}-bit not supported"
        )

    start, size = data
    if start + size > len(blob):
        raise TruncatedWavError(
            f"{path}: data chunk declares {size} bytes, "
            f"{len(blob) - start} available"
        )
    if block_align and size % block_align != 0:
        raise TruncatedWavError(f"{path}: data chunk ends mid-frame")

    raw = np.frombuffer(blob[start : start + size], dtype=dtype)
    frames = raw.reshape(-1, channels).T
    if scale is None:
        samples = frames.astype(np.float32)
    else:
        samples = frames.astype(np.float32) * np.float32(scale)
    return AudioBuffer(samples=samples, fs=fs)


def write_wav(path, buffer, fmt="float32"):
    """Emit an AudioBuffer as RIFF; pcm16 rounds half away from zero and clips."""
    if fmt == "pcm16":
        audio_format, bits = 1, 16
        x = buffer.samples.astype(np.float64) * 32768.0
        x = np.sign(x) * np.floor(np.abs(x) + 0.5)
        payload = np.clip(x, -32768, 32767).astype("<i2")
    elif fmt == "float32":
        audio_format, bits = 3, 32
        payload = buffer.samples.astype("<f4")
    else:
        raise ValueError(f"unknown format {fmt!r}")

    channels, n = buffer.channels, buffer.n_samples
    block_align = channels * bits // 8
    data_bytes = payload.T.reshape(-1).tobytes()

    chunks = [b"WAVE"]
    chunks.append(
        b"fmt " + struct.pack(
            "<IHHIIHH", 16, audio_format, channels, buffer.fs,
            buffer.fs * block_align, block_align, bits,
        )
    )
    if audio_format == 3:
        chunks.append(b"fact" + struct.pack("<II", 4, n))
    chunks.append(b"data" + struct.pack("<I", len(data_bytes)) + data_bytes)
    body = b"".join(chunks)
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def save_dictionary(path, dictionary):
    """Length-prefixed JSON header + float32 little-endian column-major atoms."""
    header = json.dumps(
        {
            "magic": DICTIONARY_MAGIC,
            "version": DICTIONARY_VERSION,
            "bins": dictionary.bins,
            "atoms": dictionary.n_atoms,
            "fs": dictionary.fs,
            "frame_size": dictionary.frame_size,
        }
    ).encode()
    payload = np.asfortranarray(dictionary.atoms.astype("<f4")).tobytes(order="F")
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(payload)


def load_dictionary(path):
    """Read and validate a dictionary container."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4:
        raise DictionaryFormatError(f"{path}: missing header length")
    (header_len,) = struct.unpack_from("<I", blob, 0)
    if 4 + header_len > len(blob):
        raise DictionaryFormatError(f"{path}: header extends past end of file")
    try:
        header = json.loads(blob[4 : 4 + header_len])
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DictionaryFormatError(f"{path}: unreadable header: {e}") from e

    if header.get("magic") != DICTIONARY_MAGIC:
        raise DictionaryFormatError(f"{path}: not a dictionary container")
    if header.get("version") != DICTIONARY_VERSION:
        raise DictionaryFormatError(
            f"{path}: version {header.get('version')} "
            f"(this build reads {DICTIONARY_VERSION})"
        )
    try:
        bins = int(header["bins"])
        n_atoms = int(header["atoms"])
        fs = int(header["fs"])
        frame_size = int(header["frame_size"])
    except (KeyError, TypeError, ValueError) as e:
        raise DictionaryFormatError(f"{path}: bad header field: {e}") from e

    payload = blob[4 + header_len :]
    expected = bins * n_atoms * 4
    if len(payload) != expected:
        raise DictionaryFormatError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    atoms = np.frombuffer(payload, dtype="<f4").reshape((bins, n_atoms), order="F")

    if not np.all(np.isfinite(atoms)):
        raise DictionaryInvariantError(f"{path}: non-finite atom entries")
    if np.any(atoms < 0):
        raise DictionaryInvariantError(f"{path}: negative atom entries")
    sums = atoms.sum(axis=0, dtype=np.float64)
    if np.any(np.abs(sums - 1.0) > 1e-3):
        raise DictionaryInvariantError(
            f"{path}: atom columns not L1-normalized (worst sum {sums.min():.6f})"
        )
    return Dictionary(atoms=atoms.copy(), fs=fs, frame_size=frame_size)
