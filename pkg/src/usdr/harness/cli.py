"""``usdr`` command-line entry point.

Exit codes: 0 ok, 2 usage or input error, 3 partial or degraded output.
Every JSON artifact is written with sorted keys so reruns with the same
``--seed`` are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

from usdr import __version__, ook
from usdr.channel import ChannelModel, apply_channels, load_channel
from usdr.harness import links, transport
from usdr.harness.chains import build_chain
from usdr.harness.gateway import lora_gateway_demo
from usdr.harness.monitor import monitor_export
from usdr.harness.sweep import SweepSpec, ber_sweep, csv_to_rows
from usdr.iq import IqFrame, peak_full_scale, read_iq_file, write_iq_file
from usdr.lora import LoRaConfig
from usdr.pipeline import ScheduleError, StageProfile, TimingTable, plan_schedule, profile_stage, run_pipeline

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 2, 3

log = logging.getLogger("usdr")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_text(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_json(path):
    if path is None:
        return None
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"invalid JSON in {path}: {exc}") from None


def _channels(path, seed) -> list[ChannelModel]:
    data = _load_json(path)
    if data is None:
        return []
    models = load_channel(data)
    models = models if isinstance(models, list) else [models]
    if seed is not None:
        models = [dataclasses.replace(m, seed=(seed + k) % 2**64) for k, m in enumerate(models)]
    return models


def _is_udp(target) -> bool:
    return isinstance(target, str) and target.startswith("udp://")


# --------------------------------------------------------------- tx / rx


def cmd_tx(args) -> int:
    if args.input is None or not os.path.isfile(args.input):
        raise UsageError(f"input not readable: {args.input}")
    if args.output is None:
        raise UsageError("--out is required")
    cfg = _load_json(args.config) or {}
    config = links.make_config(args.waveform, cfg)
    with open(args.input, "rb") as fh:
        data = fh.read()
    frame = links.transmit(args.waveform, data, config, cfg.get("max_payload", ook.MAX_PAYLOAD))
    frame = apply_channels(frame, _channels(args.channel, args.seed))
    full_scale = peak_full_scale(frame)
    desc = f"usdr {args.waveform} tx, {len(data)} bytes"
    if _is_udp(args.output):
        transport.send_bytes(links.pack_capture(frame, full_scale, desc), args.output)
    else:
        write_iq_file(frame, args.output, full_scale, desc)
    summary = {
        "kind": "tx_summary",
        "waveform": args.waveform,
        "bytes_in": len(data),
        "samples": len(frame),
        "full_scale": full_scale,
        "airtime_s": frame.duration_s,
    }
    _write_text(args.summary, _dumps(summary))
    return EXIT_OK


def _read_capture(args) -> tuple[IqFrame | None, list[int]]:
    if _is_udp(args.input):
        host, port = transport.parse_udp_url(args.input)
        with transport.UdpReceiver(host, port) as rx:
            blob, missing, complete = rx.receive(first_timeout_s=args.timeout)
        if not blob and not complete:
            return None, missing
        try:
            return links.unpack_capture(blob), missing
        except (ValueError, KeyError, UnicodeDecodeError):
            return None, missing or [0]
    if args.input is None or not os.path.isfile(args.input):
        raise UsageError(f"input not readable: {args.input}")
    return read_iq_file(args.input), []


def cmd_rx(args) -> int:
    if args.output is None:
        raise UsageError("--out is required")
    config = links.make_config(args.waveform, _load_json(args.config))
    frame, missing_frags = _read_capture(args)
    if frame is None:
        data, summary = b"", {"kind": "rx_summary", "waveform": args.waveform, "frames_ok": 0, "frames_failed": 0}
        summary.update(bytes_out=0, missing_seqs=[], degraded=True, error="no capture received")
    else:
        frame = apply_channels(frame, _channels(args.channel, args.seed))
        data, summary = links.receive(args.waveform, frame, config)
    if missing_frags:
        summary["missing_fragments"] = missing_frags
        summary["degraded"] = True
    with open(args.output, "wb") as fh:
        fh.write(data)
    _write_text(args.summary, _dumps(summary))
    return EXIT_PARTIAL if summary.get("degraded") else EXIT_OK


# ------------------------------------------------------------------- sweep


def cmd_sweep(args) -> int:
    d = _load_json(args.spec)
    if not isinstance(d, dict):
        raise UsageError("sweep spec must be a JSON object")
    if args.seed is not None:
        d["seed"] = args.seed
    try:
        spec = SweepSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid sweep spec: {exc}") from None
    _write_text(args.output, ber_sweep(spec))
    return EXIT_OK


# ---------------------------------------------------------------- pipeline


def cmd_pipeline_profile(args) -> int:
    stages, deps, source = build_chain(args.chain, args.seed or 0)
    x = source(0)
    profiles = []
    for sid, fn in stages.items():
        profiles.append(profile_stage(fn, x, runs=args.runs, stage_id=sid).to_dict())
        x = fn(x)
    doc = {"kind": "profiles", "chain": args.chain, "profiles": profiles, "dependencies": [list(d) for d in deps]}
    _write_text(args.output, _dumps(doc))
    return EXIT_OK


def cmd_pipeline_plan(args) -> int:
    doc = _load_json(args.profiles)
    try:
        profiles = [StageProfile.from_dict(p) for p in doc["profiles"]]
        deps = [tuple(d) for d in doc.get("dependencies", [])]
        table = plan_schedule(profiles, deps, args.period, args.budget_factor)
    except ScheduleError as exc:
        print(f"usdr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid profiles file: {exc}") from None
    out = table.to_dict()
    if "chain" in doc:
        out["chain"] = doc["chain"]
    _write_text(args.output, _dumps(out))
    return EXIT_OK


def _parse_slow(items) -> dict:
    out = {}
    for item in items or []:
        stage, sep, secs = item.partition("=")
        if not sep:
            raise UsageError(f"--slow expects STAGE=SECONDS, got {item!r}")
        out[stage] = float(secs)
    return out


def cmd_pipeline_run(args) -> int:
    doc = _load_json(args.table)
    try:
        table = TimingTable.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid timing table: {exc}") from None
    chain = args.chain or doc.get("chain")
    if chain is None:
        raise UsageError("timing table names no chain; pass --chain")
    stages, _, source = build_chain(chain, args.seed or 0)
    slow = _parse_slow(args.slow)
    unknown = set(slow) - set(stages)
    if unknown:
        raise UsageError(f"--slow names unknown stage(s) {sorted(unknown)}")
    if args.realtime:

        def delayed(fn, extra):
            def run(x):
                time.sleep(extra)
                return fn(x)

            return run

        stages = {s: delayed(fn, slow[s]) if s in slow else fn for s, fn in stages.items()}
        report = run_pipeline(stages, table, args.cycles, source, mode="realtime")
    else:
        durations = {s: table.entry(s).expected_runtime_s + extra for s, extra in slow.items()}
        report = run_pipeline(stages, table, args.cycles, source, mode="simulate", durations=durations)
    _write_text(args.output, report.to_json() + "\n")
    return EXIT_PARTIAL if report.miss_count else EXIT_OK


# ------------------------------------------------------------ demo, monitor


def _interval(args) -> tuple[float, float]:
    if args.interval_ms is None:
        return (2.0, 5.0)
    lo, _, hi = args.interval_ms.partition(",")
    lo_s = float(lo) / 1000.0
    return (lo_s, float(hi) / 1000.0 if hi else lo_s)


def cmd_demo_gateway(args) -> int:
    if args.nodes < 1:
        raise UsageError("--nodes must be >= 1")
    config = links.make_config("lora", _load_json(args.config)) if args.config else LoRaConfig(sf=7, cr=4)
    if args.log and os.path.exists(args.log) and not args.append:
        os.remove(args.log)
    try:
        _, stats = lora_gateway_demo(
            args.nodes,
            args.duration,
            _interval(args),
            seed=args.seed or 0,
            config=config,
            snr_db=args.snr_db,
            log_path=args.log,
            quiet=args.quiet,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.stats:
        _write_text(args.stats, _dumps(stats))
    return EXIT_OK


def _load_artifact(path):
    if path.endswith(".csv"):
        with open(path) as fh:
            return {"kind": "sweep", "rows": csv_to_rows(fh.read())}
    return _load_json(path)


def cmd_monitor_export(args) -> int:
    missing = [p for p in args.inputs if not os.path.isfile(p)]
    if missing:
        raise UsageError(f"artifact(s) not found: {missing}")
    try:
        metrics = monitor_export([_load_artifact(p) for p in args.inputs])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write_text(args.output, _dumps(metrics))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="usdr", description="Software-defined radio modems and test harness.")
    p.add_argument("--version", action="version", version=f"usdr {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    for wf in links.WAVEFORMS:
        wp = sub.add_parser(wf, help=f"{wf} transmit/receive")
        wsub = wp.add_subparsers(dest="direction", required=True)
        for direction, fn in (("tx", cmd_tx), ("rx", cmd_rx)):
            d = wsub.add_parser(direction)
            d.add_argument("--config", help="modem config JSON")
            d.add_argument("--channel", help="channel model JSON (object or list)")
            d.add_argument("--in", dest="input", help="input path or udp://host:port")
            d.add_argument("--out", dest="output", help="output path or udp://host:port")
            d.add_argument("--seed", type=int, help="overrides channel seeds")
            d.add_argument("--summary", default="-", help="where to write the JSON summary (default stdout)")
            if direction == "rx":
                d.add_argument("--timeout", type=float, default=10.0, help="seconds to wait for the first datagram")
            d.set_defaults(func=fn, waveform=wf)

    sw = sub.add_parser("sweep", help="BER/SER sweep over AWGN")
    sw.add_argument("--spec", required=True)
    sw.add_argument("--out", dest="output", default="-")
    sw.add_argument("--seed", type=int)
    sw.set_defaults(func=cmd_sweep)

    pp = sub.add_parser("pipeline", help="profile, plan and run a stage chain")
    psub = pp.add_subparsers(dest="action", required=True)
    pr = psub.add_parser("profile")
    pr.add_argument("--chain", default="ofdm", choices=["lora", "ofdm"])
    pr.add_argument("--runs", type=int, default=5)
    pr.add_argument("--seed", type=int)
    pr.add_argument("--out", dest="output", default="-")
    pr.set_defaults(func=cmd_pipeline_profile)
    pl = psub.add_parser("plan")
    pl.add_argument("--profiles", required=True)
    pl.add_argument("--period", type=float, required=True, help="seconds")
    pl.add_argument("--budget-factor", type=float, default=1.2)
    pl.add_argument("--out", dest="output", default="-")
    pl.set_defaults(func=cmd_pipeline_plan)
    rn = psub.add_parser("run")
    rn.add_argument("--table", required=True)
    rn.add_argument("--cycles", type=int, default=10)
    rn.add_argument("--chain", choices=["lora", "ofdm"])
    rn.add_argument("--realtime", action="store_true", help="wall-clock execution instead of simulated time")
    rn.add_argument("--slow", action="append", metavar="STAGE=SECONDS", help="add delay to a stage every cycle")
    rn.add_argument("--seed", type=int)
    rn.add_argument("--out", dest="output", default="-")
    rn.set_defaults(func=cmd_pipeline_run)

    dm = sub.add_parser("demo", help="demonstrations")
    dsub = dm.add_subparsers(dest="demo", required=True)
    gw = dsub.add_parser("lora-gateway")
    gw.add_argument("--nodes", type=int, default=3)
    gw.add_argument("--duration", type=float, default=30.0, help="simulated seconds")
    gw.add_argument("--interval-ms", help="LO,HI report interval in milliseconds (default 2000,5000)")
    gw.add_argument("--config", help="LoRa config JSON")
    gw.add_argument("--snr-db", type=float)
    gw.add_argument("--log", help="JSON-lines telemetry log")
    gw.add_argument("--append", action="store_true", help="append to an existing log")
    gw.add_argument("--stats", help="write gateway statistics JSON here")
    gw.add_argument("--quiet", action="store_true")
    gw.add_argument("--seed", type=int)
    gw.set_defaults(func=cmd_demo_gateway)

    mo = sub.add_parser("monitor", help="metrics export")
    msub = mo.add_subparsers(dest="action", required=True)
    ex = msub.add_parser("export")
    ex.add_argument("inputs", nargs="+", help="rx summaries, schedule reports, sweep CSVs, gateway stats")
    ex.add_argument("--out", dest="output", default="-")
    ex.set_defaults(func=cmd_monitor_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usdr: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"usdr: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
