import binascii
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles.lora import crc_long_division, lfsr_bytes, popcount
from usdr.lora.codec import (
    codewords_to_matrix,
    decode_codewords,
    deinterleave,
    gray_demap,
    gray_map,
    hamming_decode,
    hamming_encode,
    interleave,
    matrix_to_codewords,
    whiten,
    whiten_cyclic,
    whitening_sequence,
)
from usdr.lora.crc import crc8_bits, crc8_header, crc16

CHECK = b"123456789"


# ------------------------------------------------------------------- crc


def test_crc16_check_values():
    assert crc16(CHECK, "CCITT") == 0x29B1
    assert crc16(CHECK, "IBM") == 0xBB3D
    assert crc16(b"", "CCITT") == 0xFFFF
    assert crc16(b"", "IBM") == 0x0000


@given(st.binary(max_size=300))
def test_crc16_matches_long_division(data):
    assert crc16(data, "CCITT") == crc_long_division(data, 16, 0x1021, 0xFFFF, False)
    assert crc16(data, "CCITT") == binascii.crc_hqx(data, 0xFFFF)
    assert crc16(data, "IBM") == crc_long_division(data, 16, 0x8005, 0x0000, True)


def test_crc16_unknown_variant():
    with pytest.raises(ValueError):
        crc16(b"x", "XMODEM")


def test_crc8_header_zero_and_detection():
    assert crc8_header(0) == 0
    for h in range(1 << 12):
        c = crc8_header(h)
        for k in range(12):
            assert crc8_header(h ^ (1 << k)) != c


def test_crc8_header_bits_form():
    h = 0b1010_0110_0011
    bits = [(h >> (11 - k)) & 1 for k in range(12)]
    assert crc8_header(bits) == crc8_header(h) == crc8_bits(bits)


# -------------------------------------------------------------- whitening


def test_whitening_prefix_and_oracle():
    seq = whitening_sequence()
    assert bytes(seq[:8]) == bytes([0xFF, 0xFE, 0xFC, 0xF8, 0xF0, 0xE1, 0xC2, 0x85])
    assert bytes(seq) == lfsr_bytes(255)
    assert len(set(lfsr_bytes(255))) == 255  # maximal length


def test_whiten_zero_and_involution(rng):
    assert whiten(bytes(40)) == lfsr_bytes(40)
    for n in (0, 1, 17, 255):
        x = rng.bytes(n)
        assert whiten(whiten(x)) == x


def test_whiten_period_limit():
    with pytest.raises(ValueError, match="payload exceeds whitening period"):
        whiten(bytes(256))
    x = bytes(range(256)) + b"ab"
    assert whiten_cyclic(whiten_cyclic(x)) == x
    assert whiten_cyclic(x[:255]) == whiten(x[:255])


# ---------------------------------------------------------------- hamming


def test_hamming_identity_and_zero():
    for x in range(16):
        assert hamming_encode(x, 0) == x
        assert hamming_decode(x, 0) == (x, False, False)
    for cr in range(5):
        assert hamming_encode(0, cr) == 0


def test_hamming_systematic():
    for cr in range(5):
        for x in range(16):
            assert hamming_encode(x, cr) >> cr == x


def test_cr1_parity():
    for x in range(16):
        cw = hamming_encode(x, 1)
        assert popcount(cw) % 2 == 0
        nib, corrected, failed = hamming_decode(cw ^ 1, 1)
        assert failed and not corrected


def test_cr2_detects_single_errors():
    for x in range(16):
        cw = hamming_encode(x, 2)
        for k in range(6):
            _, corrected, failed = hamming_decode(cw ^ (1 << k), 2)
            assert failed and not corrected


def test_minimum_distances():
    expected = {1: 2, 2: 2, 3: 3, 4: 4}
    for cr, dmin in expected.items():
        cws = [hamming_encode(x, cr) for x in range(16)]
        assert min(popcount(a ^ b) for a, b in itertools.combinations(cws, 2)) == dmin


@pytest.mark.parametrize("cr,n", [(3, 7), (4, 8)])
def test_single_error_correction_exhaustive(cr, n):
    for x in range(16):
        cw = hamming_encode(x, cr)
        assert hamming_decode(cw, cr) == (x, False, False)
        for k in range(n):
            assert hamming_decode(cw ^ (1 << k), cr) == (x, True, False)


def test_cr4_double_error_detection():
    for x in range(16):
        cw = hamming_encode(x, 4)
        for a, b in itertools.combinations(range(8), 2):
            _, _, failed = hamming_decode(cw ^ (1 << a) ^ (1 << b), 4)
            assert failed


def test_vectorised_decode_matches_scalar():
    for cr in range(5):
        cws = np.arange(1 << (4 + cr))
        nib, corr, fail = decode_codewords(cws, cr)
        for c in cws:
            assert (nib[c], bool(corr[c]), bool(fail[c])) == hamming_decode(int(c), cr)


# ------------------------------------------------------------ interleaver


SHAPES = [(sf_eff, cr) for sf_eff in range(5, 13) for cr in range(5)]


def test_interleave_zero():
    assert not interleave(np.zeros((7, 8), dtype=np.uint8)).any()


def test_interleave_diagonal_rule():
    m = np.random.Generator(np.random.Philox(3)).integers(0, 2, (7, 8)).astype(np.uint8)
    syms = interleave(m)
    for j in range(8):
        for i in range(7):
            assert (syms[j] >> (6 - i)) & 1 == m[(i - j - 1) % 7, j]


def test_interleaver_round_trip_random(rng):
    for k in range(10**4):
        sf_eff, cr = SHAPES[k % len(SHAPES)]
        m = rng.integers(0, 2, (sf_eff, 4 + cr)).astype(np.uint8)
        assert np.array_equal(deinterleave(interleave(m), sf_eff, cr), m)


def test_interleaver_bijective_sf7_cr4():
    # the map is GF(2)-linear, so mapping every unit matrix to a distinct unit
    # symbol bit proves it is a bijection on all 2^56 matrices
    seen = set()
    for i in range(7):
        for j in range(8):
            m = np.zeros((7, 8), dtype=np.uint8)
            m[i, j] = 1
            syms = interleave(m)
            assert sum(popcount(s) for s in syms) == 1
            seen.add(tuple(syms))
            assert np.array_equal(deinterleave(syms, 7, 4), m)
    assert len(seen) == 56


def test_single_symbol_corruption_hits_one_bit_per_row():
    r = np.random.Generator(np.random.Philox(11))
    m = r.integers(0, 2, (7, 8)).astype(np.uint8)
    syms = interleave(m)
    for j in range(8):
        for garbage in range(1 << 7):
            bad = syms.copy()
            bad[j] = garbage
            diff = deinterleave(bad, 7, 4) ^ m
            assert diff.sum(axis=1).max() <= 1


def test_interleaver_shape_errors():
    with pytest.raises(ValueError, match="interleaver shape error"):
        interleave(np.zeros((7, 3)))
    with pytest.raises(ValueError, match="interleaver shape error"):
        deinterleave([0, 1, 2], 7, 4)
    with pytest.raises(ValueError, match="interleaver shape error"):
        deinterleave([1 << 7] * 8, 7, 4)


def test_codeword_matrix_round_trip():
    cws = np.arange(256) % 256
    assert np.array_equal(matrix_to_codewords(codewords_to_matrix(cws, 4)), cws)
    assert codewords_to_matrix([0b1000], 0).tolist() == [[1, 0, 0, 0]]


# ------------------------------------------------------------------- gray


def test_gray_adjacency_exhaustive():
    for sf in range(6, 13):
        m = 1 << sf
        g = gray_map(np.arange(m), sf)
        assert all(popcount(a ^ b) == 1 for a, b in zip(g, np.roll(g, -1)))


def test_gray_inverse_pair():
    for sf in range(6, 13):
        x = np.arange(1 << sf)
        assert np.array_equal(gray_map(gray_demap(x, sf), sf), x)
        assert np.array_equal(gray_demap(gray_map(x, sf), sf), x)


def test_gray_reduced_rate():
    sf = 9
    vals = np.arange(1 << (sf - 2))
    idx = gray_demap(vals, sf, reduced_rate=True)
    assert np.all(idx % 4 == 0)
    assert np.array_equal(gray_map(idx, sf, reduced_rate=True), vals)
    # a +-1 bin error rounds back to the transmitted symbol
    assert np.array_equal(gray_map((idx + 1) % (1 << sf), sf, True), vals)
    assert np.array_equal(gray_map((idx - 1) % (1 << sf), sf, True), vals)


def test_gray_range_checks():
    with pytest.raises(ValueError):
        gray_map(128, 7)
    with pytest.raises(ValueError):
        gray_demap(32, 7, reduced_rate=True)
    assert isinstance(gray_map(5, 7), int)
