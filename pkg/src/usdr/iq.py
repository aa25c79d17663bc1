"""Sample and bit containers plus the int16 interleaved I/Q file format.

On disk a capture is two files::

    <name>.iq       raw little-endian int16, interleaved I0,Q0,I1,Q1,...
    <name>.iq.json  {"sample_rate_hz": ..., "full_scale": ..., "description": ...}
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

I16_MAX = 32767
I16_MIN = -32768

BitOrder = Literal["msb", "lsb"]

_DISK_DTYPE = np.dtype("<i2")


@dataclass
class IqFrame:
    """A block of complex baseband samples."""

    samples: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128).ravel()
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def power(self) -> float:
        """Mean |x|^2 (0.0 for an empty frame)."""
        if self.samples.size == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))

    def with_samples(self, samples) -> "IqFrame":
        return IqFrame(samples, self.sample_rate_hz)

    @classmethod
    def concatenate(cls, frames, sample_rate_hz=None) -> "IqFrame":
        frames = list(frames)
        if sample_rate_hz is None:
            sample_rate_hz = frames[0].sample_rate_hz if frames else 1.0
        if not frames:
            return cls(np.zeros(0, complex), sample_rate_hz)
        return cls(np.concatenate([f.samples for f in frames]), sample_rate_hz)


@dataclass
class BitBuffer:
    """Ordered bits with the bit order used to expand them from bytes."""

    bits: np.ndarray
    bit_order: BitOrder = "msb"

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        if self.bit_order not in ("msb", "lsb"):
            raise ValueError(f"unknown bit order {self.bit_order!r}")
        if np.any(self.bits > 1):
            raise ValueError("bit values must be 0 or 1")

    def __len__(self):
        return self.bits.size


def bytes_to_bits(data: bytes, bit_order: BitOrder = "msb") -> BitBuffer:
    raw = np.frombuffer(bytes(data), dtype=np.uint8)
    order = "big" if bit_order == "msb" else "little"
    return BitBuffer(np.unpackbits(raw, bitorder=order), bit_order)


def bits_to_bytes(buf: BitBuffer) -> bytes:
    if buf.bits.size % 8:
        raise ValueError("ragged bit buffer")
    order = "big" if buf.bit_order == "msb" else "little"
    return np.packbits(buf.bits, bitorder=order).tobytes()


def quantize_i16(frame: IqFrame, full_scale: float = 1.0) -> np.ndarray:
    """Map samples to interleaved int16 words, ``round(x / full_scale * 32767)`` with saturation."""
    if not full_scale > 0:
        raise ValueError("full_scale must be positive")
    x = frame.samples
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite sample")
    out = np.empty(2 * x.size, dtype=np.float64)
    out[0::2] = x.real
    out[1::2] = x.imag
    out = np.rint(out * (I16_MAX / full_scale))
    return np.clip(out, I16_MIN, I16_MAX).astype(np.int16)


def dequantize_i16(words, full_scale: float = 1.0, sample_rate_hz: float = 1.0) -> IqFrame:
    words = np.asarray(words)
    if words.size % 2:
        raise ValueError("truncated I/Q file")
    scaled = words.astype(np.float64) * (full_scale / I16_MAX)
    return IqFrame(scaled[0::2] + 1j * scaled[1::2], sample_rate_hz)


def sidecar_path(path) -> str:
    return os.fspath(path) + ".json"


def write_iq_file(frame: IqFrame, path, full_scale: float = 1.0, description: str = "") -> None:
    """Write ``frame`` as ``path`` plus its ``path.json`` sidecar."""
    words = quantize_i16(frame, full_scale)
    words.astype(_DISK_DTYPE, copy=False).tofile(os.fspath(path))
    meta = {
        "sample_rate_hz": float(frame.sample_rate_hz),
        "full_scale": float(full_scale),
        "description": description,
    }
    with open(sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_iq_words(path) -> np.ndarray:
    """Raw int16 words of an I/Q file, host byte order."""
    words = np.fromfile(os.fspath(path), dtype=_DISK_DTYPE)
    if words.size % 2:
        raise ValueError("truncated I/Q file")
    return words.astype(np.int16)


def read_iq_metadata(path) -> dict:
    meta = {"sample_rate_hz": 1.0, "full_scale": 1.0, "description": ""}
    try:
        with open(sidecar_path(path)) as fh:
            meta.update(json.load(fh))
    except FileNotFoundError:
        warnings.warn(f"no sidecar for {os.fspath(path)}; assuming sample_rate_hz=1, full_scale=1", stacklevel=2)
    return meta


def read_iq_file(path) -> IqFrame:
    words = read_iq_words(path)
    meta = read_iq_metadata(path)
    return dequantize_i16(words, meta["full_scale"], meta["sample_rate_hz"])


def peak_full_scale(frame: IqFrame) -> float:
    """Smallest full scale that quantizes ``frame`` without saturating (1.0 for silence)."""
    if frame.samples.size == 0:
        return 1.0
    peak = float(max(np.max(np.abs(frame.samples.real)), np.max(np.abs(frame.samples.imag))))
    return peak if peak > 0 else 1.0
