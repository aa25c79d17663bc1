"""Waveform-level transmit/receive used by the CLI, the sweep and the demos.

A capture sent over UDP is a single stream holding the same content as the
``.iq`` / ``.iq.json`` file pair::

    json_len u32 (big-endian) | sidecar JSON (utf-8) | little-endian int16 I/Q words
"""

from __future__ import annotations

import json
import struct

import numpy as np

from usdr import ook
from usdr.iq import BitBuffer, IqFrame, bits_to_bytes, bytes_to_bits, dequantize_i16, peak_full_scale, quantize_i16
from usdr.lora import LoRaConfig, decode_all_frames, encode_frame
from usdr.lora.frame import MAX_PAYLOAD as LORA_MAX_PAYLOAD
from usdr.ofdm import OfdmConfig, decode_packet, encode_packet

WAVEFORMS = ("lora", "ofdm", "ook")


# ------------------------------------------------------------ capture blobs


def pack_capture(frame: IqFrame, full_scale: float | None = None, description: str = "") -> bytes:
    full_scale = peak_full_scale(frame) if full_scale is None else full_scale
    meta = json.dumps(
        {"sample_rate_hz": float(frame.sample_rate_hz), "full_scale": float(full_scale), "description": description},
        sort_keys=True,
    ).encode()
    words = quantize_i16(frame, full_scale).astype("<i2").tobytes()
    return struct.pack(">I", len(meta)) + meta + words


def unpack_capture(blob: bytes) -> IqFrame:
    if len(blob) < 4:
        raise ValueError("truncated capture")
    (n,) = struct.unpack_from(">I", blob)
    meta = json.loads(blob[4 : 4 + n].decode())
    body = blob[4 + n :]
    if len(body) % 4:
        body = body[: len(body) - len(body) % 4]
    words = np.frombuffer(body, dtype="<i2")
    return dequantize_i16(words, meta["full_scale"], meta["sample_rate_hz"])


# ------------------------------------------------------------------- config


def make_config(waveform: str, d: dict | None = None):
    d = d or {}
    if waveform == "lora":
        return LoRaConfig.from_dict(d)
    if waveform == "ofdm":
        return OfdmConfig.from_dict(d)
    if waveform == "ook":
        return ook.OokConfig.from_dict({k: v for k, v in d.items() if k != "max_payload"})
    raise ValueError(f"unknown waveform {waveform!r}")


# --------------------------------------------------------------- transmit


def lora_transmit(data: bytes, config: LoRaConfig) -> IqFrame:
    """One frame per 255-byte chunk, back to back."""
    chunks = [data[i : i + LORA_MAX_PAYLOAD] for i in range(0, len(data), LORA_MAX_PAYLOAD)]
    frames = [encode_frame(c, config) for c in chunks]
    return IqFrame.concatenate(frames, config.sample_rate_hz)


def ofdm_transmit(data: bytes, config: OfdmConfig) -> IqFrame:
    packet = encode_packet(bytes_to_bits(data).bits, config)
    return IqFrame(packet.samples, config.sample_rate_hz)


def ook_transmit(data: bytes, config: ook.OokConfig, max_payload: int = ook.MAX_PAYLOAD) -> IqFrame:
    fs = config.sample_rate_hz
    return IqFrame.concatenate(ook.transmit_frames(data, config, max_payload, fs), fs)


def transmit(waveform: str, data: bytes, config, max_payload: int = ook.MAX_PAYLOAD) -> IqFrame:
    if waveform == "lora":
        return lora_transmit(data, config)
    if waveform == "ofdm":
        return ofdm_transmit(data, config)
    return ook_transmit(data, config, max_payload)


# ---------------------------------------------------------------- receive


def _summary(waveform: str, frame: IqFrame, data: bytes, **extra) -> dict:
    airtime = frame.duration_s
    out = {
        "kind": "rx_summary",
        "waveform": waveform,
        "samples": int(len(frame)),
        "sample_rate_hz": float(frame.sample_rate_hz),
        "airtime_s": airtime,
        "bytes_out": len(data),
        "throughput_bps": (8 * len(data) / airtime) if airtime > 0 else 0.0,
        "frames_ok": 0,
        "frames_failed": 0,
        "corrected_bits": 0,
        "missing_seqs": [],
        "schedule_misses": 0,
    }
    out.update(extra)
    out["degraded"] = bool(out["frames_failed"] or out["missing_seqs"])
    return out


def lora_receive(frame: IqFrame, config: LoRaConfig) -> tuple[bytes, dict]:
    results = decode_all_frames(frame, config)
    data = b"".join(p for p, st in results if st.ok and p is not None)
    ok = sum(st.ok for _, st in results)
    summary = _summary(
        "lora",
        frame,
        data,
        frames_ok=ok,
        frames_failed=len(results) - ok,
        corrected_bits=sum(st.corrected_bits for _, st in results),
        preamble_found=bool(results),
        not_found=0 if results else 1,
        frames=[st.to_dict() for _, st in results],
    )
    return data, summary


def ofdm_receive(frame: IqFrame, config: OfdmConfig) -> tuple[bytes, dict]:
    try:
        bits, evm = decode_packet(np.real(frame.samples), config)
    except ValueError as exc:
        return b"", _summary("ofdm", frame, b"", frames_failed=1, error=str(exc), evm_db=None)
    bits = bits[: bits.size - bits.size % 8]
    data = bits_to_bytes(BitBuffer(bits))
    return data, _summary("ofdm", frame, data, frames_ok=1, evm_db=evm)


def ook_receive(frame: IqFrame, config: ook.OokConfig) -> tuple[bytes, dict]:
    x = np.real(frame.samples)
    x = x[: x.size - x.size % config.sps]
    try:
        data, missing = ook.receive_stream(x, config)
    except ValueError as exc:
        return b"", _summary("ook", frame, b"", frames_failed=1, error=str(exc))
    return data, _summary("ook", frame, data, frames_ok=1, missing_seqs=missing)


def receive(waveform: str, frame: IqFrame, config) -> tuple[bytes, dict]:
    if waveform == "lora":
        return lora_receive(frame, config)
    if waveform == "ofdm":
        return ofdm_receive(frame, config)
    return ook_receive(frame, config)
