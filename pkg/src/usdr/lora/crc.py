"""CRC-16 (CCITT, IBM) for the payload and CRC-8 for the explicit header.

Parameters:

=======  ======  ======  =========  ========
variant  poly    init    reflected  xor-out
=======  ======  ======  =========  ========
CCITT    0x1021  0xFFFF  no         0x0000
IBM      0x8005  0x0000  in/out     0x0000
header   0x07    0x00    no         0x00
=======  ======  ======  =========  ========
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable

CRC16_PARAMS = {
    "CCITT": dict(poly=0x1021, init=0xFFFF, reflect=False),
    "IBM": dict(poly=0x8005, init=0x0000, reflect=True),
}
CRC8_POLY = 0x07
CRC8_INIT = 0x00


def _reflect(value: int, width: int) -> int:
    out = 0
    for _ in range(width):
        out = (out << 1) | (value & 1)
        value >>= 1
    return out


@lru_cache(maxsize=None)
def _table16(poly: int) -> tuple:
    table = []
    for byte in range(256):
        reg = byte << 8
        for _ in range(8):
            reg = ((reg << 1) ^ poly) if reg & 0x8000 else (reg << 1)
        table.append(reg & 0xFFFF)
    return tuple(table)


def crc16(payload: bytes, variant: str = "CCITT") -> int:
    try:
        params = CRC16_PARAMS[variant]
    except KeyError:
        raise ValueError(f"unknown CRC-16 variant {variant!r}") from None
    table = _table16(params["poly"])
    reflect = params["reflect"]
    reg = params["init"]
    for byte in bytes(payload):
        if reflect:
            byte = _reflect(byte, 8)
        reg = ((reg << 8) & 0xFFFF) ^ table[(reg >> 8) ^ byte]
    return _reflect(reg, 16) if reflect else reg


def crc8_bits(bits: Iterable[int], poly: int = CRC8_POLY, init: int = CRC8_INIT) -> int:
    """Bit-serial CRC-8 over an arbitrary-length bit sequence, MSB first."""
    reg = init
    for bit in bits:
        feedback = ((reg >> 7) & 1) ^ (int(bit) & 1)
        reg = (reg << 1) & 0xFF
        if feedback:
            reg ^= poly
    return reg


def crc8_header(header_bits: int | Iterable[int]) -> int:
    """Checksum over the 12 leading header bits (payload length, CR, CRC flag).

    ``header_bits`` may be the 12-bit integer or a sequence of 12 bits, MSB first.
    """
    if isinstance(header_bits, int):
        if not 0 <= header_bits < 1 << 12:
            raise ValueError("header field must fit in 12 bits")
        bits = [(header_bits >> (11 - i)) & 1 for i in range(12)]
    else:
        bits = [int(b) for b in header_bits]
        if len(bits) != 12:
            raise ValueError("header field must be 12 bits")
    return crc8_bits(bits)
