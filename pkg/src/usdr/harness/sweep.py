"""Seeded BER/SER sweeps over AWGN for the three modems.

A trial is one LoRa frame (``payload_len`` random bytes, symbol timing
known), one OFDM packet or one OOK burst (``bits_per_trial`` random bits).
SER is reported for LoRa chirp symbols only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from usdr.channel import ChannelModel, apply_channel
from usdr.iq import IqFrame
from usdr.lora import LoRaConfig
from usdr.lora.css import demodulate_symbols, modulate_symbols
from usdr.lora.frame import HEADER_SYMBOLS, decode_payload_symbols, encode_symbols
from usdr.ofdm import OfdmConfig, decode_packet, encode_packet
from usdr.ook import OokConfig, ook_demodulate, ook_modulate

CSV_COLUMNS = ("waveform", "snr_db", "trials", "bit_errors", "ber", "ser")


@dataclass
class SweepSpec:
    waveform: str
    config: dict = field(default_factory=dict)
    snr_points_db: list = field(default_factory=lambda: [None])
    trials_per_point: int = 10
    seed: int = 0
    payload_len: int = 16
    bits_per_trial: int = 4096

    def __post_init__(self):
        if self.waveform not in ("lora", "ofdm", "ook"):
            raise ValueError(f"unknown waveform {self.waveform!r}")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be >= 1")
        if not self.snr_points_db:
            raise ValueError("snr_points_db must not be empty")
        self.snr_points_db = [_parse_snr(s) for s in self.snr_points_db]

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        return cls(**d)


def _parse_snr(s) -> float:
    if s is None or (isinstance(s, str) and s.strip().lower() in ("inf", "+inf", "none", "off")):
        return math.inf
    return float(s)


def _rngs(seed: int, point: int):
    data_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, point, 0])))
    chan_seeds = np.random.SeedSequence([seed, point, 1]).generate_state(4096 * 2, dtype=np.uint32)
    return data_rng, chan_seeds


def _channel(snr_db: float, chan_seeds, trial: int) -> ChannelModel:
    if math.isinf(snr_db):
        return ChannelModel("ideal")
    k = trial % (chan_seeds.size // 2)
    seed = (int(chan_seeds[2 * k]) << 32 | int(chan_seeds[2 * k + 1])) ^ (trial // (chan_seeds.size // 2))
    return ChannelModel("awgn", snr_db=snr_db, seed=seed)


def _lora_point(spec, cfg: LoRaConfig, snr_db, point):
    data_rng, seeds = _rngs(spec.seed, point)
    bit_errors = sym_errors = n_sym = 0
    n_head = HEADER_SYMBOLS if cfg.explicit_header else 0
    for t in range(spec.trials_per_point):
        payload = data_rng.integers(0, 256, spec.payload_len, dtype=np.uint8).tobytes()
        symbols = encode_symbols(payload, cfg)
        rx = apply_channel(IqFrame(modulate_symbols(symbols, cfg)), _channel(snr_db, seeds, t))
        idx, _ = demodulate_symbols(rx.samples, cfg)
        sym_errors += int(np.count_nonzero(idx != symbols))
        n_sym += symbols.size
        got, *_ = decode_payload_symbols(idx[n_head:], len(payload), cfg, cfg.cr, cfg.payload_crc)
        diff = np.frombuffer(got, np.uint8) ^ np.frombuffer(payload, np.uint8)
        bit_errors += int(np.unpackbits(diff).sum())
    n_bits = spec.trials_per_point * spec.payload_len * 8
    return bit_errors, n_bits, sym_errors / n_sym


def _ofdm_point(spec, cfg: OfdmConfig, snr_db, point):
    data_rng, seeds = _rngs(spec.seed, point)
    bit_errors = 0
    for t in range(spec.trials_per_point):
        bits = data_rng.integers(0, 2, spec.bits_per_trial, dtype=np.uint8)
        pkt = encode_packet(bits, cfg)
        rx = apply_channel(IqFrame(pkt.samples), _channel(snr_db, seeds, t))
        got, _ = decode_packet(np.real(rx.samples), cfg, n_bits=bits.size)
        bit_errors += int(np.count_nonzero(got != bits))
    return bit_errors, spec.trials_per_point * spec.bits_per_trial, None


def _ook_point(spec, cfg: OokConfig, snr_db, point):
    data_rng, seeds = _rngs(spec.seed, point)
    bit_errors = 0
    for t in range(spec.trials_per_point):
        bits = data_rng.integers(0, 2, spec.bits_per_trial, dtype=np.uint8)
        rx = apply_channel(ook_modulate(bits, cfg), _channel(snr_db, seeds, t))
        try:
            got = ook_demodulate(rx, cfg)
            bit_errors += int(np.count_nonzero(got != bits))
        except ValueError:
            bit_errors += bits.size
    return bit_errors, spec.trials_per_point * spec.bits_per_trial, None


def ber_sweep_rows(spec: SweepSpec) -> list[dict]:
    from usdr.harness.links import make_config

    cfg = make_config(spec.waveform, spec.config)
    point_fn = {"lora": _lora_point, "ofdm": _ofdm_point, "ook": _ook_point}[spec.waveform]
    rows = []
    for k, snr in enumerate(spec.snr_points_db):
        errors, n_bits, ser = point_fn(spec, cfg, snr, k)
        rows.append(
            {
                "waveform": spec.waveform,
                "snr_db": snr,
                "trials": spec.trials_per_point,
                "bit_errors": errors,
                "bits": n_bits,
                "ber": errors / n_bits,
                "ser": ser,
            }
        )
    return rows


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        snr = "inf" if math.isinf(r["snr_db"]) else f"{r['snr_db']:g}"
        ser = "" if r["ser"] is None else f"{r['ser']:.6e}"
        w.writerow([r["waveform"], snr, r["trials"], r["bit_errors"], f"{r['ber']:.6e}", ser])
    return buf.getvalue()


def ber_sweep(spec: SweepSpec) -> str:
    """Run the sweep and return the CSV table."""
    return rows_to_csv(ber_sweep_rows(spec))


def csv_to_rows(text: str) -> list[dict]:
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append(
            {
                "waveform": r["waveform"],
                "snr_db": _parse_snr(r["snr_db"]),
                "trials": int(r["trials"]),
                "bit_errors": int(r["bit_errors"]),
                "ber": float(r["ber"]),
                "ser": float(r["ser"]) if r["ser"] else None,
            }
        )
    return rows
