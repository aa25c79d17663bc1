"""Bit-level LoRa codec stages: whitening, Hamming FEC, diagonal interleaving, Gray indexing.

Codeword layout: a codeword for coding-rate index ``cr`` is a ``4 + cr`` bit
integer ``(nibble << cr) | parity``, so bit 0 of the matrix row (leftmost) is
the nibble MSB.  A ``CodewordMatrix`` is a ``(rows, 4 + cr)`` uint8 array of
those bits with one codeword per row.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# ---------------------------------------------------------------- whitening

WHITENING_POLY_TAPS = (7, 5, 4, 3)  # x^8 + x^6 + x^5 + x^4 + 1
WHITENING_SEED = 0xFF
WHITENING_PERIOD = 255


@lru_cache(maxsize=1)
def whitening_sequence() -> np.ndarray:
    """One period (255 bytes) of the whitening byte stream.

    Each output byte is the LFSR state; the state then shifts left once with
    the XOR of the tap bits entering at the LSB.
    """
    state = WHITENING_SEED
    out = np.empty(WHITENING_PERIOD, dtype=np.uint8)
    for k in range(WHITENING_PERIOD):
        out[k] = state
        fb = 0
        for tap in WHITENING_POLY_TAPS:
            fb ^= (state >> tap) & 1
        state = ((state << 1) & 0xFF) | fb
    return out


def whiten(data: bytes) -> bytes:
    """XOR with the whitening stream; applying it twice restores the input."""
    if len(data) > WHITENING_PERIOD:
        raise ValueError("payload exceeds whitening period")
    return whiten_cyclic(data)


def whiten_cyclic(data: bytes) -> bytes:
    """Whitening that repeats the sequence past one period (frame payload plus CRC can reach 257 bytes)."""
    raw = np.frombuffer(bytes(data), dtype=np.uint8)
    seq = np.resize(whitening_sequence(), raw.size)
    return (raw ^ seq).tobytes()


# ------------------------------------------------------------------ hamming

# Parity contribution of each data bit (d3, d2, d1, d0), MSB parity first.
_PARITY_ROWS = {
    1: (0b1, 0b1, 0b1, 0b1),
    2: (0b10, 0b11, 0b11, 0b01),
    3: (0b110, 0b101, 0b011, 0b111),
}


def _parity(nibble: int, cr: int) -> int:
    if cr == 0:
        return 0
    rows = _PARITY_ROWS[min(cr, 3)]
    p = 0
    for k in range(4):
        if (nibble >> (3 - k)) & 1:
            p ^= rows[k]
    if cr == 4:
        cw7 = (nibble << 3) | p
        p = (p << 1) | (bin(cw7).count("1") & 1)
    return p


def _check_cr(cr: int):
    if not 0 <= cr <= 4:
        raise ValueError(f"cr must be in 0..4, got {cr}")


def hamming_encode(nibble: int, cr: int) -> int:
    _check_cr(cr)
    if not 0 <= nibble < 16:
        raise ValueError("nibble out of range")
    return (nibble << cr) | _parity(nibble, cr)


def _decode_rule(codeword: int, cr: int) -> tuple[int, bool, bool]:
    nibble = codeword >> cr
    if cr == 0:
        return nibble, False, False
    if cr in (1, 2):
        ok = _parity(nibble, cr) == codeword & ((1 << cr) - 1)
        return nibble, False, not ok

    if cr == 3:
        syndrome = _parity(nibble, 3) ^ (codeword & 0b111)
        overall_odd = None
    else:
        syndrome = _parity(nibble, 3) ^ ((codeword >> 1) & 0b111)
        overall_odd = bin(codeword).count("1") & 1

    if syndrome == 0:
        if overall_odd:
            return nibble, True, False  # the overall parity bit itself flipped
        return nibble, False, False
    if overall_odd == 0:
        return nibble, False, True  # double error, detected only
    rows = _PARITY_ROWS[3]
    if syndrome in rows:
        nibble ^= 1 << (3 - rows.index(syndrome))
    return nibble, True, False


@lru_cache(maxsize=None)
def decode_table(cr: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lookup arrays (nibble, corrected, failed) indexed by received codeword."""
    _check_cr(cr)
    size = 1 << (4 + cr)
    nib = np.empty(size, np.uint8)
    corr = np.empty(size, bool)
    fail = np.empty(size, bool)
    for cw in range(size):
        nib[cw], corr[cw], fail[cw] = _decode_rule(cw, cr)
    return nib, corr, fail


@lru_cache(maxsize=None)
def encode_table(cr: int) -> np.ndarray:
    return np.array([hamming_encode(n, cr) for n in range(16)], dtype=np.uint16)


def hamming_decode(codeword: int, cr: int) -> tuple[int, bool, bool]:
    """Return ``(nibble, corrected, failed)``."""
    _check_cr(cr)
    if not 0 <= codeword < 1 << (4 + cr):
        raise ValueError("codeword out of range")
    nib, corr, fail = decode_table(cr)
    return int(nib[codeword]), bool(corr[codeword]), bool(fail[codeword])


def encode_nibbles(nibbles, cr: int) -> np.ndarray:
    return encode_table(cr)[np.asarray(nibbles, dtype=np.intp)]


def decode_codewords(codewords, cr: int):
    """Vectorized :func:`hamming_decode`; returns arrays (nibbles, corrected, failed)."""
    nib, corr, fail = decode_table(cr)
    idx = np.asarray(codewords, dtype=np.intp)
    return nib[idx], corr[idx], fail[idx]


# -------------------------------------------------------------- interleaver


def codewords_to_matrix(codewords, cr: int) -> np.ndarray:
    n = 4 + cr
    cw = np.asarray(codewords, dtype=np.int64)[:, None]
    shifts = np.arange(n - 1, -1, -1)
    return ((cw >> shifts) & 1).astype(np.uint8)


def matrix_to_codewords(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.int64)
    n = matrix.shape[1]
    return (matrix << np.arange(n - 1, -1, -1)).sum(axis=1)


@lru_cache(maxsize=None)
def _rotation(sf_eff: int, n: int) -> np.ndarray:
    i = np.arange(sf_eff)[None, :]
    j = np.arange(n)[:, None]
    return (i - j - 1) % sf_eff


def _check_shape(sf_eff: int, n: int):
    if not (1 <= sf_eff <= 12 and 4 <= n <= 8):
        raise ValueError("interleaver shape error")


def interleave(matrix) -> np.ndarray:
    """Diagonal interleaving of a ``(sf_eff, 4 + cr)`` codeword matrix.

    Symbol ``j`` takes column ``j`` of the matrix with row rotation
    ``symbol_bit[i] = matrix[(i - j - 1) % sf_eff][j]``, bit 0 being the MSB.
    Returns ``4 + cr`` integers of ``sf_eff`` bits.
    """
    matrix = np.asarray(matrix, dtype=np.uint8)
    if matrix.ndim != 2:
        raise ValueError("interleaver shape error")
    sf_eff, n = matrix.shape
    _check_shape(sf_eff, n)
    rows = _rotation(sf_eff, n)
    bits = matrix[rows, np.arange(n)[:, None]].astype(np.int64)
    return (bits << np.arange(sf_eff - 1, -1, -1)).sum(axis=1)


def deinterleave(symbols, sf_eff: int, cr: int) -> np.ndarray:
    symbols = np.asarray(symbols, dtype=np.int64)
    n = 4 + cr
    _check_shape(sf_eff, n)
    if symbols.shape != (n,) or np.any(symbols < 0) or np.any(symbols >= 1 << sf_eff):
        raise ValueError("interleaver shape error")
    bits = ((symbols[:, None] >> np.arange(sf_eff - 1, -1, -1)) & 1).astype(np.uint8)
    matrix = np.empty((sf_eff, n), dtype=np.uint8)
    matrix[_rotation(sf_eff, n), np.arange(n)[:, None]] = bits
    return matrix


# --------------------------------------------------------------------- gray


def gray(x):
    x = np.asarray(x, dtype=np.int64)
    return x ^ (x >> 1)


def inverse_gray(g):
    g = np.asarray(g, dtype=np.int64)
    out = g.copy()
    shift = g >> 1
    while np.any(shift):
        out ^= shift
        shift >>= 1
    return out


def _as_output(value, like):
    return int(value) if np.ndim(like) == 0 else value


def gray_map(index, sf: int, reduced_rate: bool = False):
    """Receiver side: demodulated chirp index -> interleaved symbol value.

    In reduced-rate mode the index is first rounded to the nearest multiple
    of four (the two fixed LSB zeros) and reduced to ``sf - 2`` bits.
    """
    idx = np.asarray(index, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= 1 << sf):
        raise ValueError("chirp index out of range")
    if reduced_rate:
        idx = ((idx + 2) >> 2) & ((1 << (sf - 2)) - 1)
    return _as_output(gray(idx), index)


def gray_demap(symbol, sf: int, reduced_rate: bool = False):
    """Transmitter side: interleaved symbol value -> chirp index ("reverse Gray")."""
    sf_eff = sf - 2 if reduced_rate else sf
    sym = np.asarray(symbol, dtype=np.int64)
    if np.any(sym < 0) or np.any(sym >= 1 << sf_eff):
        raise ValueError("symbol value out of range")
    idx = inverse_gray(sym)
    if reduced_rate:
        idx = idx << 2
    return _as_output(idx, symbol)
