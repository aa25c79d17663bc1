import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usdr.iq import (
    BitBuffer,
    IqFrame,
    bits_to_bytes,
    bytes_to_bits,
    dequantize_i16,
    quantize_i16,
    read_iq_file,
    read_iq_words,
    sidecar_path,
    write_iq_file,
)


def test_full_scale_and_zero():
    assert quantize_i16(IqFrame([1.0 + 0j])).tolist() == [32767, 0]
    assert quantize_i16(IqFrame([0j])).tolist() == [0, 0]
    assert quantize_i16(IqFrame([])).size == 0


def test_saturation_and_order():
    q = quantize_i16(IqFrame([2.0 - 3.0j, 0.5 + 0.25j]))
    assert q.tolist() == [32767, -32768, 16384, 8192]


def test_non_finite_rejected():
    with pytest.raises(ValueError, match="non-finite sample"):
        quantize_i16(IqFrame([np.nan + 0j]))


def test_quantization_error_bound_million(rng):
    n = 10**6
    x = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    y = dequantize_i16(quantize_i16(IqFrame(x))).samples
    assert np.max(np.abs(y.real - x.real)) <= 1 / 32767
    assert np.max(np.abs(y.imag - x.imag)) <= 1 / 32767


def test_file_round_trip(tmp_path, rng):
    x = rng.uniform(-1, 1, 1000) + 1j * rng.uniform(-1, 1, 1000)
    path = tmp_path / "a.iq"
    write_iq_file(IqFrame(x, 2e6), path, description="t")
    words = quantize_i16(IqFrame(x))
    assert np.array_equal(read_iq_words(path), words)
    back = read_iq_file(path)
    assert back.sample_rate_hz == 2e6
    assert np.array_equal(quantize_i16(back), words)
    raw = np.fromfile(path, dtype="<i2")
    assert np.array_equal(raw, words)


def test_empty_file(tmp_path):
    path = tmp_path / "e.iq"
    write_iq_file(IqFrame([]), path)
    assert len(read_iq_file(path)) == 0


def test_truncated_file(tmp_path):
    path = tmp_path / "t.iq"
    np.array([1, 2, 3], dtype="<i2").tofile(path)
    with pytest.raises(ValueError, match="truncated I/Q file"):
        read_iq_file(path)


def test_missing_sidecar_warns(tmp_path):
    path = tmp_path / "n.iq"
    np.array([100, -100], dtype="<i2").tofile(path)
    with pytest.warns(UserWarning):
        frame = read_iq_file(path)
    assert frame.sample_rate_hz == 1.0
    assert len(frame) == 1


def test_sidecar_name():
    assert sidecar_path("x/y.iq") == "x/y.iq.json"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**5), st.integers(0, 2**32 - 1))
def test_file_round_trip_property(tmp_path_factory, n, seed):
    r = np.random.Generator(np.random.Philox(seed))
    x = r.uniform(-1.2, 1.2, n) + 1j * r.uniform(-1.2, 1.2, n)
    path = tmp_path_factory.mktemp("iq") / "p.iq"
    write_iq_file(IqFrame(x), path)
    assert np.array_equal(quantize_i16(read_iq_file(path)), quantize_i16(IqFrame(x)))


def test_bits_examples():
    assert bytes_to_bits(b"\xa5").bits.tolist() == [1, 0, 1, 0, 0, 1, 0, 1]
    assert bytes_to_bits(b"\xa5", "lsb").bits.tolist() == [1, 0, 1, 0, 0, 1, 0, 1][::-1]


@pytest.mark.parametrize("order", ["msb", "lsb"])
def test_bits_exhaustive_round_trip(order):
    data = bytes(range(256))
    assert bits_to_bytes(bytes_to_bits(data, order)) == data


def test_ragged_bits():
    with pytest.raises(ValueError, match="ragged bit buffer"):
        bits_to_bytes(BitBuffer(np.ones(7, dtype=np.uint8)))


def test_frame_validation():
    with pytest.raises(ValueError):
        IqFrame([1j], sample_rate_hz=0)
