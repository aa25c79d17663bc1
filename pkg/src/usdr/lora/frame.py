"""LoRa frame assembly: explicit header, payload codec chain and full-frame Tx/Rx.

Transmit chain per payload::

    payload (+ CRC-16) -> whiten -> nibbles (high first) -> Hamming(cr)
    -> blocks of sf_eff codewords -> diagonal interleave -> reverse Gray
    (-> << 2 in reduced-rate mode) -> chirp indices -> CSS

The explicit header always uses CR=4 and reduced rate.  Payload blocks use
reduced rate when SF is 11 or 12.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from usdr.iq import IqFrame
from usdr.lora import codec
from usdr.lora.config import LoRaConfig
from usdr.lora.crc import crc8_header, crc16
from usdr.lora.css import build_preamble, demodulate_symbols, detect_preamble, modulate_symbols, preamble_len

HEADER_CR = 4
HEADER_SYMBOLS = 4 + HEADER_CR
MAX_PAYLOAD = 255


class HeaderError(ValueError):
    pass


@dataclass(frozen=True)
class HeaderFields:
    payload_len: int
    cr: int
    crc_enabled: bool

    def __post_init__(self):
        if not 0 <= self.payload_len <= 255:
            raise ValueError("payload_len must fit in one byte")
        if not 0 <= self.cr <= 4:
            raise ValueError("cr must be in 0..4")

    @property
    def bits12(self) -> int:
        return (self.payload_len << 4) | (self.cr << 1) | int(self.crc_enabled)

    @property
    def checksum(self) -> int:
        return crc8_header(self.bits12)

    def nibbles(self) -> list[int]:
        chk = self.checksum
        return [self.payload_len >> 4, self.payload_len & 0xF, (self.cr << 1) | int(self.crc_enabled), chk >> 4, chk & 0xF]


@dataclass
class FrameStatus:
    found: bool = False
    offset_samples: int = 0
    header_ok: bool = False
    crc_ok: bool | None = None
    corrected_bits: int = 0
    failed_codewords: int = 0
    end_sample: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- header


def _check_header_config(config: LoRaConfig):
    if config.sf < 7:
        raise ValueError("explicit header requires sf >= 7")


def encode_header(fields: HeaderFields, config: LoRaConfig) -> np.ndarray:
    """Header codeword matrix, shape ``(sf - 2, 8)``; rows past the 5 content nibbles are zero."""
    _check_header_config(config)
    nibbles = fields.nibbles() + [0] * (config.sf - 2 - 5)
    return codec.codewords_to_matrix(codec.encode_nibbles(nibbles, HEADER_CR), HEADER_CR)


def header_symbols(fields: HeaderFields, config: LoRaConfig) -> np.ndarray:
    matrix = encode_header(fields, config)
    return codec.gray_demap(codec.interleave(matrix), config.sf, reduced_rate=True)


def decode_header(symbols, config: LoRaConfig) -> tuple[HeaderFields, int]:
    """Decode 8 chirp indices; returns ``(fields, corrected_bits)`` or raises :class:`HeaderError`."""
    _check_header_config(config)
    symbols = np.asarray(symbols, dtype=np.int64)
    if symbols.size != HEADER_SYMBOLS:
        raise HeaderError("header corrupt")
    values = codec.gray_map(symbols, config.sf, reduced_rate=True)
    matrix = codec.deinterleave(values, config.sf - 2, HEADER_CR)
    nib, corr, fail = codec.decode_codewords(codec.matrix_to_codewords(matrix)[:5], HEADER_CR)
    if fail.any():
        raise HeaderError("header corrupt")
    payload_len = (int(nib[0]) << 4) | int(nib[1])
    cr, crc_flag = int(nib[2]) >> 1, bool(nib[2] & 1)
    checksum = (int(nib[3]) << 4) | int(nib[4])
    if cr > 4:
        raise HeaderError("header corrupt")
    fields = HeaderFields(payload_len, cr, crc_flag)
    if fields.checksum != checksum:
        raise HeaderError("header corrupt")
    return fields, int(corr.sum())


# --------------------------------------------------------------- payload


def _payload_sf_eff(config: LoRaConfig) -> int:
    return config.sf - 2 if config.payload_reduced_rate else config.sf


def payload_bytes(payload: bytes, crc: bool, variant: str = "CCITT") -> bytes:
    """Payload with its CRC-16 appended (big-endian) when ``crc`` is set."""
    body = bytes(payload)
    if crc:
        body += crc16(body, variant).to_bytes(2, "big")
    return body


def bytes_to_nibbles(data: bytes) -> np.ndarray:
    raw = np.frombuffer(bytes(data), dtype=np.uint8)
    return np.stack([raw >> 4, raw & 0xF], axis=1).ravel()


def nibbles_to_bytes(nibbles) -> bytes:
    nib = np.asarray(nibbles, dtype=np.uint8).reshape(-1, 2)
    return ((nib[:, 0] << 4) | nib[:, 1]).astype(np.uint8).tobytes()


def payload_codewords(payload: bytes, config: LoRaConfig, cr: int | None = None, crc: bool | None = None) -> np.ndarray:
    """Hamming codewords for the whitened payload(+CRC), zero-padded to whole interleaver blocks."""
    cr = config.cr if cr is None else cr
    crc = config.payload_crc if crc is None else crc
    data = codec.whiten_cyclic(payload_bytes(payload, crc, config.crc_variant))
    nibbles = bytes_to_nibbles(data)
    sf_eff = _payload_sf_eff(config)
    pad = -nibbles.size % sf_eff
    nibbles = np.concatenate([nibbles, np.zeros(pad, np.uint8)])
    return codec.encode_nibbles(nibbles, cr)


def codewords_to_symbols(codewords, config: LoRaConfig, cr: int) -> np.ndarray:
    """Interleave blocks of codewords and map them to chirp indices."""
    reduced = config.payload_reduced_rate
    sf_eff = _payload_sf_eff(config)
    codewords = np.asarray(codewords)
    if codewords.size % sf_eff:
        raise ValueError("interleaver shape error")
    out = []
    for block in codewords.reshape(-1, sf_eff):
        values = codec.interleave(codec.codewords_to_matrix(block, cr))
        out.append(codec.gray_demap(values, config.sf, reduced_rate=reduced))
    return np.concatenate(out) if out else np.zeros(0, np.int64)


def symbols_to_codewords(indices, config: LoRaConfig, cr: int) -> np.ndarray:
    reduced = config.payload_reduced_rate
    sf_eff = _payload_sf_eff(config)
    n = 4 + cr
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size % n:
        raise ValueError("interleaver shape error")
    values = codec.gray_map(indices, config.sf, reduced_rate=reduced)
    blocks = [codec.matrix_to_codewords(codec.deinterleave(v, sf_eff, cr)) for v in values.reshape(-1, n)]
    return np.concatenate(blocks) if blocks else np.zeros(0, np.int64)


def payload_symbol_count(n_bytes: int, config: LoRaConfig, cr: int | None = None, crc: bool | None = None) -> int:
    cr = config.cr if cr is None else cr
    crc = config.payload_crc if crc is None else crc
    n_nibbles = 2 * (n_bytes + (2 if crc else 0))
    return math.ceil(n_nibbles / _payload_sf_eff(config)) * (4 + cr)


def frame_symbol_count(n_bytes: int, config: LoRaConfig) -> int:
    """Chirp symbols after the preamble (header + payload)."""
    return (HEADER_SYMBOLS if config.explicit_header else 0) + payload_symbol_count(n_bytes, config)


def frame_len(n_bytes: int, config: LoRaConfig) -> int:
    """Total samples of a frame carrying ``n_bytes`` of payload."""
    return preamble_len(config) + frame_symbol_count(n_bytes, config) * config.symbol_len


def _check_payload(payload: bytes):
    if not 1 <= len(payload) <= MAX_PAYLOAD:
        raise ValueError(f"payload length must be 1..{MAX_PAYLOAD} bytes, got {len(payload)}")


def encode_symbols(payload: bytes, config: LoRaConfig) -> np.ndarray:
    """Chirp indices of header (if explicit) followed by payload."""
    payload = bytes(payload)
    _check_payload(payload)
    parts = []
    if config.explicit_header:
        parts.append(header_symbols(HeaderFields(len(payload), config.cr, config.payload_crc), config))
    parts.append(codewords_to_symbols(payload_codewords(payload, config), config, config.cr))
    return np.concatenate(parts).astype(np.int64)


def assemble_frame(symbols, config: LoRaConfig) -> IqFrame:
    """Preamble followed by CSS chirps for ``symbols``."""
    pre = build_preamble(config).samples
    return IqFrame(np.concatenate([pre, modulate_symbols(symbols, config)]), config.sample_rate_hz)


def encode_frame(payload: bytes, config: LoRaConfig) -> IqFrame:
    return assemble_frame(encode_symbols(payload, config), config)


def decode_payload_symbols(
    indices, n_bytes: int, config: LoRaConfig, cr: int, crc: bool
) -> tuple[bytes, bool | None, int, int]:
    """Invert the payload chain; returns (payload, crc_ok, corrected_bits, failed_codewords)."""
    codewords = symbols_to_codewords(indices, config, cr)
    nib, corr, fail = codec.decode_codewords(codewords, cr)
    n_total = n_bytes + (2 if crc else 0)
    data = codec.whiten_cyclic(nibbles_to_bytes(nib[: 2 * n_total]))
    payload = data[:n_bytes]
    crc_ok = None
    if crc:
        crc_ok = int.from_bytes(data[n_bytes:n_total], "big") == crc16(payload, config.crc_variant)
    return payload, crc_ok, int(corr.sum()), int(fail.sum())


def decode_frame(frame, config: LoRaConfig, payload_len: int | None = None, start: int = 0) -> tuple[bytes | None, FrameStatus]:
    """Synchronize and decode the first frame at or after ``start``.

    Never raises for channel-induced failures; those are reported in the
    returned :class:`FrameStatus` (``error`` is one of ``"no preamble"``,
    ``"header corrupt"``, ``"truncated frame"``, ``"payload crc fail"``).
    Implicit-header mode needs ``payload_len``.
    """
    samples = frame.samples if isinstance(frame, IqFrame) else np.asarray(frame)
    status = FrameStatus()
    if not config.explicit_header and payload_len is None:
        raise ValueError("implicit-header decoding needs payload_len")

    offset, found = detect_preamble(samples, config, start=start)
    status.found = found
    if not found:
        status.error = "no preamble"
        status.end_sample = samples.size
        return None, status
    status.offset_samples = offset
    L = config.symbol_len
    pos = offset + preamble_len(config)
    status.end_sample = pos

    if config.explicit_header:
        if pos + HEADER_SYMBOLS * L > samples.size:
            status.error = "truncated frame"
            return None, status
        head_idx, _ = demodulate_symbols(samples[pos : pos + HEADER_SYMBOLS * L], config)
        pos += HEADER_SYMBOLS * L
        status.end_sample = pos
        try:
            fields, corrected = decode_header(head_idx, config)
        except HeaderError:
            status.error = "header corrupt"
            return None, status
        if fields.payload_len == 0:
            status.error = "header corrupt"
            return None, status
        status.header_ok = True
        status.corrected_bits += corrected
        n_bytes, cr, crc = fields.payload_len, fields.cr, fields.crc_enabled
    else:
        status.header_ok = True
        n_bytes, cr, crc = int(payload_len), config.cr, config.payload_crc

    n_sym = payload_symbol_count(n_bytes, config, cr=cr, crc=crc)
    if pos + n_sym * L > samples.size:
        status.error = "truncated frame"
        return None, status
    idx, _ = demodulate_symbols(samples[pos : pos + n_sym * L], config)
    status.end_sample = pos + n_sym * L
    payload, crc_ok, corrected, failed = decode_payload_symbols(idx, n_bytes, config, cr, crc)
    status.crc_ok = crc_ok
    status.corrected_bits += corrected
    status.failed_codewords = failed
    if crc_ok is False:
        status.error = "payload crc fail"
    return payload, status


def decode_all_frames(frame, config: LoRaConfig, payload_len: int | None = None) -> list[tuple[bytes | None, FrameStatus]]:
    """Decode every frame in a capture, scanning forward after each one."""
    samples = frame.samples if isinstance(frame, IqFrame) else np.asarray(frame)
    results = []
    pos = 0
    while pos < samples.size:
        payload, status = decode_frame(samples, config, payload_len=payload_len, start=pos)
        if not status.found:
            break
        results.append((payload, status))
        pos = max(status.end_sample, status.offset_samples + config.symbol_len)
    return results
