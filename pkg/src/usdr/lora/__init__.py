"""LoRa PHY: codec chain, CSS modem and preamble synchronization."""

from usdr.lora.codec import (
    deinterleave,
    gray_demap,
    gray_map,
    hamming_decode,
    hamming_encode,
    interleave,
    whiten,
)
from usdr.lora.config import LoRaConfig
from usdr.lora.crc import crc8_header, crc16
from usdr.lora.css import build_preamble, css_demodulate, css_modulate, detect_preamble
from usdr.lora.frame import (
    FrameStatus,
    HeaderError,
    HeaderFields,
    decode_all_frames,
    decode_frame,
    decode_header,
    encode_frame,
    encode_header,
    encode_symbols,
    frame_len,
)

__all__ = [
    "FrameStatus",
    "HeaderError",
    "HeaderFields",
    "LoRaConfig",
    "build_preamble",
    "crc16",
    "crc8_header",
    "css_demodulate",
    "css_modulate",
    "decode_all_frames",
    "decode_frame",
    "decode_header",
    "deinterleave",
    "detect_preamble",
    "encode_frame",
    "encode_header",
    "encode_symbols",
    "frame_len",
    "gray_demap",
    "gray_map",
    "hamming_decode",
    "hamming_encode",
    "interleave",
    "whiten",
]
