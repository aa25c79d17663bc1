"""Aggregate run artifacts into a single machine-readable metrics document."""

from __future__ import annotations

import math

SCHEMA_VERSION = "1.0"


def monitor_export(run_artifacts) -> dict:
    """Combine rx summaries, schedule reports, sweep rows and gateway stats.

    Each artifact is a dict tagged by ``kind`` (``rx_summary``,
    ``schedule_report``, ``sweep`` or ``gateway``); untagged dicts with a
    ``miss_count`` are taken as schedule reports.
    """
    m = {
        "schema_version": SCHEMA_VERSION,
        "runs": 0,
        "bytes_delivered": 0,
        "airtime_s": 0.0,
        "throughput_bps": 0.0,
        "frames_ok": 0,
        "frames_failed": 0,
        "corrected_bits": 0,
        "missing_packets": 0,
        "bit_errors": 0,
        "bits_tested": 0,
        "ber": 0.0,
        "schedule_cycles": 0,
        "schedule_misses": 0,
        "evm_db_mean": None,
        "gateway_decoded": 0,
        "gateway_collided": 0,
    }
    evms = []
    for art in run_artifacts:
        m["runs"] += 1
        kind = art.get("kind") or ("schedule_report" if "miss_count" in art else None)
        if kind == "rx_summary":
            m["bytes_delivered"] += int(art.get("bytes_out", 0))
            m["airtime_s"] += float(art.get("airtime_s", 0.0))
            m["frames_ok"] += int(art.get("frames_ok", 0))
            m["frames_failed"] += int(art.get("frames_failed", 0))
            m["corrected_bits"] += int(art.get("corrected_bits", 0))
            m["missing_packets"] += len(art.get("missing_seqs", []))
            m["schedule_misses"] += int(art.get("schedule_misses", 0))
            if art.get("evm_db") is not None:
                evms.append(float(art["evm_db"]))
        elif kind == "schedule_report":
            m["schedule_cycles"] += int(art.get("cycles", 0))
            m["schedule_misses"] += int(art.get("miss_count", 0))
        elif kind == "sweep":
            for row in art.get("rows", []):
                m["bit_errors"] += int(row["bit_errors"])
                m["bits_tested"] += int(row.get("bits", 0))
        elif kind == "gateway":
            m["gateway_decoded"] += int(art.get("decoded", 0))
            m["gateway_collided"] += int(art.get("collided", 0))
            m["frames_ok"] += int(art.get("decoded", 0))
            m["frames_failed"] += int(art.get("decode_failed", 0))
        else:
            raise ValueError(f"unrecognised artifact kind {kind!r}")
    if m["airtime_s"] > 0:
        m["throughput_bps"] = 8 * m["bytes_delivered"] / m["airtime_s"]
    if m["bits_tested"]:
        m["ber"] = m["bit_errors"] / m["bits_tested"]
    if evms:
        m["evm_db_mean"] = math.fsum(evms) / len(evms)
    return m
