import json
import math

import numpy as np
import pytest

from usdr.harness.gateway import (
    SENSOR_KINDS,
    TelemetryRecord,
    Transmission,
    collisions,
    gateway_receive,
    lora_gateway_demo,
    schedule_transmissions,
)
from usdr.harness.links import lora_receive, pack_capture, unpack_capture
from usdr.harness.monitor import monitor_export
from usdr.harness.sweep import SweepSpec, ber_sweep, ber_sweep_rows, csv_to_rows
from usdr.iq import IqFrame, quantize_i16
from usdr.lora import LoRaConfig


# ------------------------------------------------------------------ sweep


@pytest.mark.parametrize("waveform", ["lora", "ofdm", "ook"])
def test_noise_free_point_has_zero_ber(waveform):
    rows = ber_sweep_rows(SweepSpec(waveform, snr_points_db=[None], trials_per_point=3, seed=1))
    assert rows[0]["bit_errors"] == 0 and rows[0]["ber"] == 0
    assert math.isinf(rows[0]["snr_db"])


def test_sweep_csv_and_determinism():
    spec = dict(waveform="ook", config={"sps": 1}, snr_points_db=[12, 6, 3], trials_per_point=4, seed=5)
    a, b = ber_sweep(SweepSpec(**spec)), ber_sweep(SweepSpec(**spec))
    assert a == b
    assert a.splitlines()[0] == "waveform,snr_db,trials,bit_errors,ber,ser"
    bers = [r["ber"] for r in csv_to_rows(a)]
    assert bers[0] <= bers[1] <= bers[2]


def test_lora_sf9_not_worse_than_sf7():
    sers = []
    for sf in (7, 9):
        rows = ber_sweep_rows(SweepSpec("lora", {"sf": sf}, [-12.0], trials_per_point=20, seed=2))
        sers.append(rows[0]["ser"])
    assert sers[1] <= sers[0]


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("fm")
    with pytest.raises(ValueError):
        SweepSpec("ook", trials_per_point=0)
    with pytest.raises(ValueError):
        SweepSpec("ook", snr_points_db=[])


# ---------------------------------------------------------------- gateway


def test_telemetry_record_bytes():
    rec = TelemetryRecord(3, "pir", 1.0, 12.5)
    assert len(rec.to_bytes()) == 19
    assert TelemetryRecord.from_bytes(rec.to_bytes()) == rec
    with pytest.raises(ValueError):
        TelemetryRecord(0, "camera", 0.0, 0.0)


def test_single_node_all_decoded():
    records, stats = lora_gateway_demo(1, 60.0, seed=4, quiet=True)
    assert stats["collided"] == 0
    assert len(records) == stats["transmitted"] > 0
    assert {r.sensor_kind for r in records} <= set(SENSOR_KINDS)


def test_identical_timestamps_collide():
    cfg = LoRaConfig(sf=7, cr=4)
    txs = [Transmission(n, 1.0, TelemetryRecord(n, "pir", 1.0, 1.0)) for n in (0, 1)]
    records, stats = gateway_receive(txs, cfg)
    assert records == [] and stats["collided"] == 2
    assert collisions(txs + [Transmission(2, 50.0, txs[0].record)], 0.1) == {0, 1}


def test_intervals_respected():
    txs = schedule_transmissions(3, 100.0, (2.0, 5.0), seed=1)
    for node in range(3):
        t = [x.start_s for x in txs if x.node_id == node]
        gaps = np.diff(t)
        assert t[0] >= 2.0 and np.all(gaps >= 2.0) and np.all(gaps <= 5.0)


def test_gateway_log_and_table(tmp_path, capsys):
    log = tmp_path / "g.jsonl"
    records, _ = lora_gateway_demo(2, 20.0, (0.5, 1.0), seed=3, log_path=log)
    lines = log.read_text().splitlines()
    assert len(lines) == len(records)
    assert json.loads(lines[0])["sensor_kind"] in SENSOR_KINDS
    assert "node" in capsys.readouterr().out


# ------------------------------------------------------------- rx + monitor


def test_capture_blob_round_trip(rng):
    f = IqFrame(rng.uniform(-1, 1, 100) + 1j * rng.uniform(-1, 1, 100), 5e5)
    g = unpack_capture(pack_capture(f, 1.0))
    assert g.sample_rate_hz == 5e5
    assert np.array_equal(quantize_i16(g), quantize_i16(f))


def test_lora_noise_only_capture():
    r = np.random.Generator(np.random.Philox(8))
    noise = IqFrame(r.normal(size=30000) + 1j * r.normal(size=30000), 125e3)
    data, summary = lora_receive(noise, LoRaConfig())
    assert data == b"" and summary["frames_ok"] == 0
    assert summary["preamble_found"] is False and summary["not_found"] == 1


def test_monitor_zero_errors_and_schema():
    m = monitor_export([])
    assert m["schema_version"]
    assert m["bit_errors"] == m["frames_failed"] == m["schedule_misses"] == m["missing_packets"] == 0
    rx = {"kind": "rx_summary", "bytes_out": 100, "airtime_s": 0.5, "frames_ok": 1, "frames_failed": 0, "evm_db": -40.0}
    m = monitor_export([rx, {"kind": "sweep", "rows": [{"bit_errors": 0, "bits": 100}]}])
    assert m["throughput_bps"] == 1600 and m["evm_db_mean"] == -40 and m["ber"] == 0


def test_monitor_counts_schedule_misses():
    rep = {"kind": "schedule_report", "cycles": 10, "miss_count": 3}
    assert monitor_export([rep])["schedule_misses"] == 3
    with pytest.raises(ValueError):
        monitor_export([{"kind": "mystery"}])
