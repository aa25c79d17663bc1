"""Acceptance checks for the primary components.

Each test records one PASS/FAIL line; the lines are repeated in the
``acceptance`` section at the end of the pytest run.
"""

import itertools
import json
import math
import time

import numpy as np

from oracles.css_ser import monte_carlo_ser
from oracles.lora import lfsr_bytes, popcount
from usdr.channel import ChannelModel, apply_channel, apply_timing_offset
from usdr.harness.cli import main
from usdr.iq import IqFrame
from usdr.lora import LoRaConfig, css_demodulate, css_modulate, decode_frame, detect_preamble, encode_frame
from usdr.lora.codec import (
    codewords_to_matrix,
    deinterleave,
    gray,
    hamming_decode,
    hamming_encode,
    interleave,
    matrix_to_codewords,
    whiten,
    whiten_cyclic,
)
from usdr.lora.css import demodulate_symbols, modulate_symbols
from usdr.ofdm import OfdmConfig, decode_packet, encode_packet, hermitian_frame, search_pilot
from usdr.ofdm.pilot import QPSK
from usdr.ook import OokConfig, receive_stream, transmit_frames
from usdr.pipeline import ScheduleError, StageProfile, plan_schedule, profile_stage, run_pipeline

# frozen from tests/oracles/css_ser.py (seed 20240601, 10^4 trials)
ORACLE_SER = {(7, 0.0): 0.0, (7, -10.0): 0.0375}


def _philox(seed):
    return np.random.Generator(np.random.Philox(seed))


def test_lora_exhaustive_loopback(verdict):
    r = _philox(20240601)
    failures = []
    t0 = time.perf_counter()
    for sf, cr in itertools.product(range(7, 13), range(5)):
        cfg = LoRaConfig(sf=sf, cr=cr)
        for _ in range(20):
            payload = r.bytes(int(r.integers(1, 256)))
            out, st = decode_frame(encode_frame(payload, cfg), cfg)
            if out != payload or not st.crc_ok or not st.header_ok:
                failures.append((sf, cr, len(payload)))
    elapsed = time.perf_counter() - t0
    verdict(
        "LoRa exhaustive loopback",
        not failures and elapsed < 120,
        f"600 frames, {len(failures)} failures, {elapsed:.1f} s (limit 120 s)",
    )


def test_lora_stage_oracles(verdict):
    failures = []
    r = _philox(7)
    for n in (0, 1, 17, 255, 256, 1000):
        data = r.bytes(n)
        w = whiten if n <= 255 else whiten_cyclic
        if w(w(data)) != data:
            failures.append(f"whiten involution n={n}")
    if whiten(bytes(8)) != lfsr_bytes(8):
        failures.append("whitening sequence")

    for cr, width in ((3, 7), (4, 8)):
        for nibble in range(16):
            cw = hamming_encode(nibble, cr)
            for k in range(width):
                value, corrected, bad = hamming_decode(cw ^ (1 << k), cr)
                if value != nibble or bad:
                    failures.append(f"hamming cr={cr} nibble={nibble} bit={k}")

    def round_trip(sf_eff, cr, codewords):
        matrix = codewords_to_matrix(codewords, cr)
        back = matrix_to_codewords(deinterleave(interleave(matrix), sf_eff, cr))
        return np.array_equal(back, codewords)

    # exhaustive for sf=7/cr=4: the map is linear over GF(2), so every unit block suffices
    for pos in range(7 * 8):
        block = np.zeros(7, dtype=np.int64)
        block[pos // 8] = 1 << (pos % 8)
        if not round_trip(7, 4, block):
            failures.append(f"interleave unit {pos}")
    for sf_eff, cr in itertools.product(range(5, 13), range(1, 5)):
        for _ in range(25):
            cws = r.integers(0, 1 << (4 + cr), sf_eff)
            if not round_trip(sf_eff, cr, cws):
                failures.append(f"interleave sf_eff={sf_eff} cr={cr}")

    x = np.arange((1 << 12) - 1)
    g = gray(x)
    adjacent = [popcount(int(a) ^ int(b)) for a, b in zip(g[:-1], g[1:])]
    if any(d != 1 for d in adjacent) or any(popcount(int(a) ^ int(b)) != 1 for a, b in zip(g, gray(x + 1))):
        failures.append("gray adjacency")
    verdict("LoRa stage oracles", not failures, f"{len(failures)} failures {failures[:3]}")


def _ser(sf, snr_db, n, seed):
    cfg = LoRaConfig(sf=sf)
    r = _philox(seed)
    syms = r.integers(0, cfg.m, n)
    errors = 0
    for lo in range(0, n, 1000):
        chunk = syms[lo : lo + 1000]
        y = apply_channel(IqFrame(modulate_symbols(chunk, cfg)), ChannelModel("awgn", snr_db=snr_db, seed=seed + lo))
        errors += int(np.count_nonzero(demodulate_symbols(y.samples, cfg)[0] != chunk))
    return errors / n


def test_css_ser_against_oracle(verdict):
    details = []
    ok = True
    for (sf, snr), oracle in ORACLE_SER.items():
        ser = _ser(sf, snr, 10**4, seed=11)
        ok &= ser <= 1.2 * oracle
        details.append(f"SF{sf} {snr:+.0f} dB SER {ser:.4g} vs oracle {oracle:.4g}")
    # the frozen oracle must still reproduce
    ok &= monte_carlo_ser(7, 0.0, 2000, seed=20240601) == 0.0
    by_sf = {sf: _ser(sf, -15.0, 10**4, seed=13) for sf in (7, 9, 11)}
    monotone = by_sf[7] >= by_sf[9] >= by_sf[11]
    details.append("-15 dB SER by SF " + ", ".join(f"{k}:{v:.4g}" for k, v in by_sf.items()))
    verdict("CSS demod robustness", ok and monotone, "; ".join(details))


def test_preamble_sync(verdict):
    cfg = LoRaConfig(sf=7)
    frame = encode_frame(b"sync check", cfg)
    offsets = (0, 1, 17, 37, 4 * cfg.m)
    hits = {}
    for off in offsets:
        shifted = apply_timing_offset(frame, off)
        hits[off] = 0
        for trial in range(1000):
            y = apply_channel(shifted, ChannelModel("awgn", snr_db=10.0, seed=trial * 7 + off))
            hits[off] += detect_preamble(y, cfg) == (off, True)
    worst = min(hits.values()) / 1000
    verdict(
        "Preamble sync",
        worst >= 0.99,
        "recovery per offset " + ", ".join(f"{k}:{v / 10:.1f}%" for k, v in hits.items()),
    )


def _brute_force_papr(cfg):
    best = math.inf
    for combo in itertools.product(range(4), repeat=cfg.p):
        x = np.fft.ifft(hermitian_frame(QPSK[list(combo)], cfg)).real
        best = min(best, 10 * np.log10(np.max(x**2) / np.mean(x**2)))
    return best


def test_dco_ofdm(verdict):
    r = _philox(3)
    cfg = OfdmConfig(qam_order=16)
    symbols = (r.normal(size=cfg.p) + 1j * r.normal(size=cfg.p)) / np.sqrt(2)
    x = np.fft.ifft(hermitian_frame(symbols, cfg))
    real_ratio = np.max(np.abs(x.imag)) / np.max(np.abs(x.real))

    bits = r.integers(0, 2, 8000, dtype=np.uint8)
    out, evm = decode_packet(encode_packet(bits, cfg).samples, cfg)
    ideal_ok = np.array_equal(out, bits) and evm < -80

    fir_cfg = OfdmConfig(n_fft=128, p=50, cp_len=2, qam_order=16)
    tx = encode_packet(bits, fir_cfg).samples
    rx = apply_channel(IqFrame(tx), ChannelModel("fir_isi", taps=[1.0, 0.5, 0.2])).samples.real
    fir_ok = np.array_equal(decode_packet(rx, fir_cfg)[0], bits)

    pilot_ok = True
    for p in range(1, 5):
        pcfg = OfdmConfig(n_fft=16, p=p)
        pilot_ok &= abs(search_pilot(pcfg, candidate_budget=4**p).papr_db - _brute_force_papr(pcfg)) < 1e-12
    verdict(
        "DCO-OFDM",
        real_ratio < 1e-9 and ideal_ok and fir_ok and pilot_ok,
        f"imag/real {real_ratio:.2e}, ideal EVM {evm:.1f} dB bit-exact={ideal_ok}, FIR bit-exact={fir_ok}, pilot P<=4 exact={pilot_ok}",
    )


def test_ook_file_transfer(verdict):
    cfg = OokConfig(sps=1)
    data = _philox(5).bytes(1 << 20)
    x = np.concatenate([f.samples for f in transmit_frames(data, cfg)])
    out, missing = receive_stream(x, cfg)
    clean = out == data and missing == []

    frames = list(transmit_frames(data, cfg))
    start = sum(len(f) for f in frames[:6])
    y = x.copy()
    y[start + 8 * 500] = 1 - y[start + 8 * 500]
    _, missing_fault = receive_stream(y, cfg)
    verdict(
        "NRZ-OOK file transfer",
        clean and missing_fault == [6],
        f"1 MiB in {len(frames)} packets byte-identical={out == data}, fault in packet 6 -> missing_seqs={missing_fault}",
    )


def test_scheduler(verdict):
    r = _philox(17)
    mismatches = 0
    for trial in range(500):
        n = int(r.integers(1, 9))
        p95s = r.uniform(1e-6, 1e-2, n)
        period = float(r.uniform(1e-5, 5e-2))
        factor = float(r.uniform(0.5, 2.0))
        profiles = [StageProfile(f"s{k}", float(v), float(v), 5) for k, v in enumerate(p95s)]
        deps = [(f"s{k}", f"s{k + 1}") for k in range(n - 1)]
        feasible = math.fsum(factor * float(v) for v in p95s) <= period
        try:
            plan_schedule(profiles, deps, period, factor)
            mismatches += not feasible
        except ScheduleError:
            mismatches += feasible

    # Controlled-duration stages isolate the executor from compute jitter on the host.
    durations = {"capture": 0.05, "demod": 0.12, "decode": 0.08}

    def sleeper(d):
        return lambda x: (time.sleep(d), (x or 0) + 1)[1]

    stages = {sid: sleeper(d) for sid, d in durations.items()}
    deps = [("capture", "demod"), ("demod", "decode")]
    profiles = [profile_stage(fn, 0, runs=5, stage_id=sid) for sid, fn in stages.items()]
    table = plan_schedule(profiles, deps, period_s=0.4)

    budget = table.entry("demod").budget_s
    slow = dict(stages, demod=sleeper(budget + 0.05))
    cycles = 6
    overrun = run_pipeline(slow, table, cycles, mode="realtime")
    over_ok = overrun.misses_by_stage()["demod"] == cycles

    clean_runs = [run_pipeline(stages, table, 6, mode="realtime").miss_count for _ in range(3)]
    clean_ok = sum(m == 0 for m in clean_runs) >= 2
    verdict(
        "Scheduler",
        mismatches == 0 and over_ok and clean_ok,
        f"feasibility mismatches {mismatches}/500, over-budget misses {overrun.misses_by_stage()['demod']}/{cycles}, "
        f"unloaded miss counts {clean_runs}",
    )


# ------------------------------------------------------------ determinism

_TIMING_KEYS = {"median_runtime_s", "p95_runtime_s", "release_ts", "start_ts", "end_ts", "deadline_met", "miss_count", "misses_by_stage"}


def _strip_timing(obj):
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if k not in _TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


REALTIME_CALL = 10  # index of ``pipeline run --realtime`` in the session's exit codes


def _cli_session(d):
    """Run every CLI command once inside ``d``; return artifact paths."""
    r = _philox(99)
    (d / "in.bin").write_bytes(r.bytes(6000))
    (d / "short.bin").write_bytes(r.bytes(60))
    (d / "ch.json").write_text(json.dumps({"kind": "awgn", "snr_db": 30, "seed": 0}))
    (d / "lora.json").write_text(json.dumps({"sf": 8, "cr": 3}))
    (d / "sweep.json").write_text(
        json.dumps({"waveform": "lora", "config": {"sf": 7}, "snr_points_db": [-12, -8, 0], "trials_per_point": 20, "seed": 1})
    )
    calls = []
    for wf, src, cfg in (("ook", "in.bin", None), ("ofdm", "in.bin", None), ("lora", "short.bin", "lora.json")):
        extra = ["--config", str(d / cfg)] if cfg else []
        calls.append([wf, "tx", *extra, "--in", str(d / src), "--out", str(d / f"{wf}.iq"), "--channel", str(d / "ch.json"), "--seed", "4", "--summary", str(d / f"{wf}_tx.json")])
        calls.append([wf, "rx", *extra, "--in", str(d / f"{wf}.iq"), "--out", str(d / f"{wf}.out"), "--summary", str(d / f"{wf}_rx.json")])
    calls += [
        ["sweep", "--spec", str(d / "sweep.json"), "--out", str(d / "sweep.csv"), "--seed", "2"],
        ["pipeline", "profile", "--chain", "lora", "--runs", "3", "--seed", "1", "--out", str(d / "profiles.json")],
    ]
    codes = [main(c) for c in calls]
    # planning from measured profiles is only as stable as the profiles, so plan from a fixed set too
    (d / "fixed_profiles.json").write_text(
        json.dumps(
            {
                "kind": "profiles",
                "chain": "lora",
                "profiles": [StageProfile(s, 0.002, 0.003, 5).to_dict() for s in ("encode", "channel", "decode")],
                "dependencies": [["encode", "channel"], ["channel", "decode"]],
            }
        )
    )
    calls = [
        ["pipeline", "plan", "--profiles", str(d / "fixed_profiles.json"), "--period", "0.05", "--out", str(d / "table.json")],
        ["pipeline", "run", "--table", str(d / "table.json"), "--cycles", "5", "--seed", "3", "--out", str(d / "run.json")],
        ["pipeline", "run", "--table", str(d / "table.json"), "--cycles", "3", "--seed", "3", "--realtime", "--out", str(d / "run_rt.json")],
        ["demo", "lora-gateway", "--nodes", "3", "--duration", "8", "--seed", "5", "--quiet", "--log", str(d / "gw.jsonl"), "--stats", str(d / "gw.json")],
        ["monitor", "export", str(d / "ook_rx.json"), str(d / "ofdm_rx.json"), str(d / "run.json"), str(d / "gw.json"), str(d / "sweep.csv"), "--out", str(d / "monitor.json")],
    ]
    codes += [main(c) for c in calls]
    exact = [
        "ook.iq", "ook.out", "ook_tx.json", "ook_rx.json",
        "ofdm.iq", "ofdm.out", "ofdm_tx.json", "ofdm_rx.json",
        "lora.iq", "lora.out", "lora_tx.json", "lora_rx.json",
        "sweep.csv", "table.json", "run.json", "gw.jsonl", "gw.json", "monitor.json",
    ]
    return codes, exact, ["profiles.json", "run_rt.json"]


def test_cli_determinism(tmp_path, verdict):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    codes_a, exact, timed = _cli_session(a)
    codes_b, _, _ = _cli_session(b)
    differing = [n for n in exact if (a / n).read_bytes() != (b / n).read_bytes()]
    differing += [
        n for n in timed if _strip_timing(json.loads((a / n).read_text())) != _strip_timing(json.loads((b / n).read_text()))
    ]
    # the realtime run exits 3 on a wall-clock miss, so only its range is checked
    rt = REALTIME_CALL
    fixed_a, fixed_b = codes_a[:rt] + codes_a[rt + 1 :], codes_b[:rt] + codes_b[rt + 1 :]
    ok = not differing and fixed_a == fixed_b and all(c == 0 for c in fixed_a) and {codes_a[rt], codes_b[rt]} <= {0, 3}
    verdict(
        "CLI determinism",
        ok,
        f"{len(exact)} artifacts byte-identical, {len(timed)} wall-clock artifacts identical after removing timings, "
        f"differing={differing}, exit codes {codes_a}",
    )


def test_throughput_floor(verdict):
    cfg = LoRaConfig(sf=7)
    count = 0
    t0 = time.perf_counter()
    while time.perf_counter() - t0 < 1.0:
        for s in range(cfg.m):
            sym, _ = css_demodulate(css_modulate(s, cfg), cfg)
        count += cfg.m
    rate = count * cfg.m / (time.perf_counter() - t0)
    verdict(
        "Throughput floor",
        rate >= 1e5,
        f"css_modulate + css_demodulate SF7 {rate:.3g} samples/s (target 1e6, hard floor 1e5, target met={rate >= 1e6})",
    )
