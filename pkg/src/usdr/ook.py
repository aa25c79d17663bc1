"""NRZ on-off keying and the packet layer used for file transfer.

Packet wire layout (big-endian)::

    b"USDR" | seq u32 | total u32 | len u32 | payload[len] | crc32 u32

The CRC-32 (zlib parameters) covers the 16 header bytes and the payload.
"""

from __future__ import annotations

import struct
import zlib
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from usdr.iq import IqFrame, bits_to_bytes, bytes_to_bits, BitBuffer

MAGIC = b"USDR"
MAX_PAYLOAD = 64435
_HEADER = struct.Struct(">4sIII")
HEADER_LEN = _HEADER.size
OVERHEAD = HEADER_LEN + 4


@dataclass(frozen=True)
class OokConfig:
    sps: int = 4
    high_level: float = 1.0
    mode: str = "unipolar"
    sample_rate_hz: float = 1e6  # capture metadata only

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.sps < 1:
            raise ValueError("sps must be >= 1")
        if not self.high_level > 0:
            raise ValueError("high_level must be positive")
        if self.mode not in ("unipolar", "bipolar"):
            raise ValueError("mode must be 'unipolar' or 'bipolar'")

    def to_dict(self) -> dict:
        return {"sps": self.sps, "high_level": self.high_level, "mode": self.mode, "sample_rate_hz": self.sample_rate_hz}

    @classmethod
    def from_dict(cls, d: dict) -> "OokConfig":
        return cls(**d)


def ook_levels(bits, config: OokConfig) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    low = 0.0 if config.mode == "unipolar" else -config.high_level
    return np.where(bits == 1, config.high_level, low).repeat(config.sps)


def ook_modulate(bits, config: OokConfig, sample_rate_hz: float | None = None) -> IqFrame:
    bits = np.asarray(bits).ravel()
    if bits.size == 0:
        raise ValueError("nothing to modulate")
    return IqFrame(ook_levels(bits, config), sample_rate_hz or config.sample_rate_hz)


def ook_demodulate(frame, config: OokConfig) -> np.ndarray:
    """Integrate-and-dump per symbol, then threshold at the midpoint of the extremes."""
    x = frame.samples if isinstance(frame, IqFrame) else np.asarray(frame)
    x = np.real(x)
    if x.size % config.sps:
        raise ValueError("symbol framing error")
    if x.size == 0:
        return np.zeros(0, np.uint8)
    avg = x.reshape(-1, config.sps).mean(axis=1)
    lo, hi = avg.min(), avg.max()
    if lo == hi:
        raise ValueError("unresolvable threshold")
    threshold = (lo + hi) / 2
    return (avg > threshold).astype(np.uint8)


# ----------------------------------------------------------------- packets


class PacketError(ValueError):
    pass


@dataclass(frozen=True)
class Packet:
    seq: int
    total: int
    payload: bytes
    crc32: int | None = None

    @property
    def length(self) -> int:
        return len(self.payload)

    def header_bytes(self) -> bytes:
        return _HEADER.pack(MAGIC, self.seq, self.total, len(self.payload))

    def computed_crc(self) -> int:
        return zlib.crc32(self.header_bytes() + self.payload) & 0xFFFFFFFF

    @property
    def crc_ok(self) -> bool:
        return self.crc32 is None or self.crc32 == self.computed_crc()

    def to_bytes(self) -> bytes:
        crc = self.computed_crc() if self.crc32 is None else self.crc32
        return self.header_bytes() + self.payload + crc.to_bytes(4, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Packet":
        if len(data) < OVERHEAD:
            raise PacketError("short packet")
        magic, seq, total, length = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise PacketError("bad magic")
        if len(data) != OVERHEAD + length:
            raise PacketError("length mismatch")
        payload = bytes(data[HEADER_LEN : HEADER_LEN + length])
        crc = int.from_bytes(data[HEADER_LEN + length :], "big")
        return cls(seq, total, payload, crc)


def packetize(stream: bytes, max_payload: int = MAX_PAYLOAD) -> list[Packet]:
    """Split ``stream`` into sequentially numbered packets (an empty stream yields one empty packet)."""
    if not 1 <= max_payload <= MAX_PAYLOAD:
        raise ValueError(f"max_payload must be in [1, {MAX_PAYLOAD}]")
    stream = bytes(stream)
    chunks = [stream[i : i + max_payload] for i in range(0, len(stream), max_payload)] or [b""]
    total = len(chunks)
    packets = []
    for seq, chunk in enumerate(chunks):
        p = Packet(seq, total, chunk)
        packets.append(Packet(seq, total, chunk, p.computed_crc()))
    return packets


def depacketize(packets: Iterable[Packet | bytes], expected_total: int | None = None) -> tuple[bytes, list[int]]:
    """Reassemble in sequence order; returns ``(data, missing_seqs)``.

    Packets failing their CRC are dropped.  ``missing_seqs`` lists every
    sequence number in ``range(total)`` without a valid packet.  When no valid
    packet carries the total, the most common total among the damaged headers
    is used (ties go to the smaller value).
    """
    good: dict[int, bytes] = {}
    total = expected_total
    damaged_totals: list[int] = []
    for item in packets:
        if not isinstance(item, Packet):
            try:
                item = Packet.from_bytes(item)
            except PacketError:
                continue
        if not item.crc_ok:
            if item.seq < item.total:
                damaged_totals.append(item.total)
            continue
        if total is None:
            total = item.total
        if item.seq < item.total:
            good.setdefault(item.seq, item.payload)
    if total is None and damaged_totals:
        counts = Counter(damaged_totals)
        total = min(counts, key=lambda t: (-counts[t], t))
    if total is None:
        return b"", []
    missing = [s for s in range(total) if s not in good]
    data = b"".join(good[s] for s in range(total) if s in good)
    return data, missing


def serialize_packets(packets: Iterable[Packet]) -> bytes:
    return b"".join(p.to_bytes() for p in packets)


def parse_packet_stream(data: bytes) -> tuple[list[Packet], int]:
    """Split a byte stream into packets, resynchronizing on the magic after damage.

    Returns ``(packets, skipped_bytes)``.  Returned packets may still fail
    their CRC; :func:`depacketize` drops those.
    """
    data = bytes(data)
    packets, pos, skipped = [], 0, 0
    while pos + OVERHEAD <= len(data):
        if data[pos : pos + 4] != MAGIC:
            nxt = data.find(MAGIC, pos + 1)
            if nxt < 0:
                skipped += len(data) - pos
                break
            skipped += nxt - pos
            pos = nxt
            continue
        length = _HEADER.unpack_from(data, pos)[3]
        end = pos + OVERHEAD + length
        if length > MAX_PAYLOAD or end > len(data):
            pos += 1
            skipped += 1
            continue
        pkt = Packet.from_bytes(data[pos:end])
        if not pkt.crc_ok:
            # a damaged length field can swallow later packets: prefer a valid one that starts inside
            inner = _next_valid(data, pos + 1, end)
            if inner is not None:
                packets.append(pkt)
                skipped += inner - pos
                pos = inner
                continue
        packets.append(pkt)
        pos = end
    return packets, skipped


def _next_valid(data: bytes, lo: int, hi: int) -> int | None:
    pos = data.find(MAGIC, lo, hi)
    while pos >= 0:
        if pos + OVERHEAD <= len(data):
            length = _HEADER.unpack_from(data, pos)[3]
            end = pos + OVERHEAD + length
            if length <= MAX_PAYLOAD and end <= len(data) and Packet.from_bytes(data[pos:end]).crc_ok:
                return pos
        pos = data.find(MAGIC, pos + 1, hi)
    return None


# ------------------------------------------------------------ file transfer


def transmit_frames(data: bytes, config: OokConfig, max_payload: int = MAX_PAYLOAD, sample_rate_hz: float | None = None) -> Iterator[IqFrame]:
    """One modulated burst per packet."""
    for pkt in packetize(data, max_payload):
        bits = bytes_to_bits(pkt.to_bytes()).bits
        yield ook_modulate(bits, config, sample_rate_hz)


def receive_samples(samples, config: OokConfig, chunk_bits: int = 1 << 20) -> bytes:
    """Demodulate a sample stream to bytes, thresholding chunk by chunk."""
    x = np.real(np.asarray(samples))
    step = config.sps * chunk_bits
    out = []
    for lo in range(0, x.size - x.size % config.sps, step):
        seg = x[lo : min(lo + step, x.size - x.size % config.sps)]
        out.append(ook_demodulate(seg, config))
    bits = np.concatenate(out) if out else np.zeros(0, np.uint8)
    bits = bits[: bits.size - bits.size % 8]
    return bits_to_bytes(BitBuffer(bits))


def receive_stream(samples, config: OokConfig) -> tuple[bytes, list[int]]:
    packets, _ = parse_packet_stream(receive_samples(samples, config))
    return depacketize(packets)
