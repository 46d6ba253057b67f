"""WAV decoding, dataset manifests and fixed-length segmentation."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from motorbnn.errors import (
    EmptySignalError,
    UnsupportedFormatError,
    WavFormatError,
)

CLASS_LABELS = ("healthy", "fault1", "fault2", "fault3", "fault4")

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True)
class SignalRecord:
    """A mono recording normalised to [-1, 1]."""

    samples: np.ndarray
    sample_rate: int
    label: str | None = None
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise EmptySignalError(f"record {self.source_id!r} has no samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.label is not None and self.label not in CLASS_LABELS:
            raise ValueError(f"unknown class label {self.label!r}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Segment:
    samples: np.ndarray
    sample_rate: int
    parent: str
    index: int


def _decode_frames(raw: bytes, fmt_tag: int, bits: int) -> np.ndarray:
    if fmt_tag == _FORMAT_PCM:
        if bits == 8:
            return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
        if bits == 16:
            return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        if bits == 24:
            b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
            ints = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
            ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
            return ints.astype(np.float64) / float(1 << 23)
        if bits == 32:
            return np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
        raise UnsupportedFormatError(f"unsupported PCM bit depth {bits}")
    if fmt_tag == _FORMAT_FLOAT:
        if bits != 32:
            raise UnsupportedFormatError(f"unsupported float bit depth {bits}")
        data = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise WavFormatError("data", "non-finite float samples")
        return np.clip(data, -1.0, 1.0)
    raise UnsupportedFormatError(f"unsupported WAVE format tag 0x{fmt_tag:04x}")


def decode_wav_bytes(blob: bytes, *, source_id: str = "", label: str | None = None,
                     downmix: bool = True):
    """Decode an in-memory RIFF/WAVE file.

    With ``downmix=False`` the per-channel matrix of shape (frames, channels)
    and the sample rate are returned instead of a :class:`SignalRecord`.
    """
    if len(blob) < 12:
        raise WavFormatError("RIFF", "file shorter than the 12-byte RIFF header")
    riff, _size, wave = struct.unpack("<4sI4s", blob[:12])
    if riff != b"RIFF":
        raise WavFormatError("RIFF", f"expected 'RIFF' magic, found {riff!r}")
    if wave != b"WAVE":
        raise WavFormatError("RIFF", f"expected 'WAVE' form type, found {wave!r}")

    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(blob):
        cid, csize = struct.unpack("<4sI", blob[pos:pos + 8])
        body = blob[pos + 8:pos + 8 + csize]
        name = cid.decode("latin-1")
        if len(body) < csize:
            if cid == b"data":
                # tolerate a truncated final data chunk, keep whole frames only
                pass
            else:
                raise WavFormatError(name, f"declares {csize} bytes, only {len(body)} present")
        if cid == b"fmt ":
            if csize < 16:
                raise WavFormatError("fmt ", f"chunk is {csize} bytes, need at least 16")
            fmt = body
        elif cid == b"data":
            data = body
        pos += 8 + csize + (csize & 1)

    if fmt is None:
        raise WavFormatError("fmt ", "chunk missing")
    if data is None:
        raise WavFormatError("data", "chunk missing")

    fmt_tag, channels, rate, _byte_rate, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if fmt_tag == _FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise WavFormatError("fmt ", "extensible format without sub-format GUID")
        fmt_tag = struct.unpack("<H", fmt[24:26])[0]
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{channels} channels; only mono and stereo are supported")
    if rate == 0:
        raise WavFormatError("fmt ", "sample rate is zero")
    if bits == 0 or bits % 8:
        raise UnsupportedFormatError(f"unsupported bit depth {bits}")
    if block_align != channels * bits // 8:
        raise WavFormatError("fmt ", f"block_align {block_align} inconsistent with "
                                     f"{channels} x {bits}-bit samples")

    n_frames = len(data) // block_align
    if n_frames == 0:
        raise EmptySignalError(f"{source_id or 'WAV'}: data chunk holds no samples")
    frames = _decode_frames(data[:n_frames * block_align], fmt_tag, bits)
    frames = frames.reshape(n_frames, channels)
    if not downmix:
        return frames, int(rate)
    return SignalRecord(frames.mean(axis=1), int(rate), label=label, source_id=source_id)


def load_wav(path, label: str | None = None) -> SignalRecord:
    """Read a PCM (8/16/24/32-bit) or 32-bit float WAV file as a mono record."""
    path = Path(path)
    return decode_wav_bytes(path.read_bytes(), source_id=str(path), label=label)


def write_wav(path, samples, sample_rate: int, *, float32: bool = False) -> None:
    """Write samples in [-1, 1] as 16-bit PCM (or 32-bit float).

    ``samples`` may be 1-D (mono) or 2-D with shape (frames, channels).
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    channels = arr.shape[1]
    if float32:
        payload = arr.astype("<f4").tobytes()
        tag, bits = _FORMAT_FLOAT, 32
    else:
        ints = np.clip(np.round(arr * 32768.0), -32768, 32767).astype("<i2")
        payload = ints.tobytes()
        tag, bits = _FORMAT_PCM, 16
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, sample_rate,
                      sample_rate * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def segment(record: SignalRecord, window_seconds: float = 1.0) -> list[Segment]:
    """Split a record into consecutive, non-overlapping windows.

    A trailing remainder shorter than one window is dropped.
    """
    if window_seconds <= 0:
        raise ValueError("window_seconds must be positive")
    width = int(round(record.sample_rate * window_seconds))
    if width < 2:
        raise ValueError(f"window of {width} samples is too short")
    count = record.samples.size // width
    return [
        Segment(record.samples[i * width:(i + 1) * width], record.sample_rate,
                record.source_id, i)
        for i in range(count)
    ]


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    line: int
    raw: str


def read_manifest(path) -> list[ManifestEntry]:
    """Parse ``<relative-path>,<label>`` lines; paths resolve against the manifest's directory.

    Blank lines and lines starting with ``#`` are ignored.
    """
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        rel, sep, label = text.rpartition(",")
        label = label.strip()
        if not sep or not rel.strip():
            raise ValueError(f"{path}:{lineno}: expected '<path>,<label>', got {text!r}")
        if label not in CLASS_LABELS:
            raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
        entries.append(ManifestEntry(path.parent / rel.strip(), label, lineno, text))
    return entries


def write_manifest(path, rows) -> None:
    """Write (relative-path, label) pairs as a manifest file."""
    Path(path).write_text("".join(f"{rel},{label}\n" for rel, label in rows))
