"""Batch and service entry points: validate, spawn, run, serve, export.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 protocol
error (e.g. the endpoint cannot be bound).  Summaries go to stdout as
JSON; diagnostics go to stderr.  The environment variable
``LUSIM_ENDPOINT`` overrides the ``--endpoint`` flag.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .config import (
    load_scene,
    parse_gscm_config,
    parse_radio_config,
    parse_scenario_config,
    validate_cross,
)
from .engine import assemble_engine, prepare_mpcs
from .errors import ConfigError, LusimError, Truncated
from .gscm import save_spawn
from .link import ChannelLogWriter, LogRecord, engine_serve, read_channel_log, read_log_meta

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_PROTOCOL = 3

DEFAULT_ENDPOINT = "127.0.0.1:47001"


class _Bundle:
    def __init__(self, gscm, radio, scenario, scene, scenario_dir):
        self.gscm = gscm
        self.radio = radio
        self.scenario = scenario
        self.scene = scene
        self.scenario_dir = scenario_dir

    def resolve(self, path: str) -> str:
        return path if os.path.isabs(path) else os.path.join(self.scenario_dir, path)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise ConfigError(path, "$", f"cannot read file: {e}") from None


def _load_bundle(args, seed_override=None) -> _Bundle:
    gscm = parse_gscm_config(_read_text(args.gscm), args.gscm)
    radio = parse_radio_config(_read_text(args.radio), args.radio)
    scenario = parse_scenario_config(_read_text(args.scenario), args.scenario)
    if seed_override is not None:
        gscm = replace(gscm, spawn_seed=seed_override)
        scenario = replace(scenario, scenario_seed=seed_override)
    scenario_dir = os.path.dirname(os.path.abspath(args.scenario))
    scene_path = scenario.scene_path
    if not os.path.isabs(scene_path):
        scene_path = os.path.join(scenario_dir, scene_path)
    scene = load_scene(_read_text(scene_path), scene_path)
    return _Bundle(gscm, radio, scenario, scene, scenario_dir)


def _endpoint_from(args) -> tuple[str, int]:
    spec = os.environ.get("LUSIM_ENDPOINT") or args.endpoint or DEFAULT_ENDPOINT
    host, _, port = spec.rpartition(":")
    return host or "127.0.0.1", int(port)


# -- commands -------------------------------------------------------------------


def cmd_validate(args) -> int:
    failed = False
    parsed = {}
    for name, parser in (("gscm", parse_gscm_config), ("radio", parse_radio_config),
                         ("scenario", parse_scenario_config)):
        path = getattr(args, name)
        try:
            parsed[name] = parser(_read_text(path), path)
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            failed = True
    if "scenario" in parsed:
        scenario_dir = os.path.dirname(os.path.abspath(args.scenario))
        scene_path = parsed["scenario"].scene_path
        if not os.path.isabs(scene_path):
            scene_path = os.path.join(scenario_dir, scene_path)
        try:
            load_scene(_read_text(scene_path), scene_path)
        except (ConfigError, LusimError) as e:
            print(f"error: {e}", file=sys.stderr)
            failed = True
    if len(parsed) == 3:
        for issue in validate_cross(parsed["gscm"], parsed["radio"], parsed["scenario"]):
            print(f"{issue.severity}: {issue.message} [{', '.join(issue.keys)}]",
                  file=sys.stderr)
            if issue.severity == "error":
                failed = True
    return EXIT_CONFIG if failed else EXIT_OK


def cmd_spawn(args) -> int:
    try:
        bundle = _load_bundle(args, args.seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except LusimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        raw, ready = prepare_mpcs(bundle.scene, bundle.gscm)
        blob = save_spawn(ready)
        with open(args.out, "wb") as f:
            f.write(blob)
    except LusimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({
        "spawned": raw.counts_by_order(),
        "after_filtering": ready.counts_by_order(),
        "total": len(ready),
        "out": args.out,
    }))
    return EXIT_OK


def _run_steps(engine, scenario, writer) -> dict:
    """Step the engine and log every (BS, UE) realization per step.

    LUSIM_THREADS > 1 computes the pairs of one step concurrently; the
    per-pair math is independent and counter-seeded, and records are
    written in fixed pair order, so output bytes do not depend on the
    thread count.
    """
    n_steps = int(np.floor(scenario.duration / scenario.step + 1e-9))
    threads = int(os.environ.get("LUSIM_THREADS", "1"))
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    records = 0
    path_counts = []
    pairs = [(bs, ue) for bs in engine.bs_ids for ue in engine.ue_ids]
    try:
        for k in range(1, n_steps + 1):
            engine.step_to(k * scenario.step)
            if pool is not None:
                engine.refresh_visibility()  # shared cast batch, done once up front
                realizations = list(pool.map(
                    lambda pair: engine.get_channel(*pair), pairs))
            else:
                realizations = [engine.get_channel(bs, ue) for bs, ue in pairs]
            for real in realizations:
                writer.append(real)
                records += 1
                path_counts.append(len(real.paths))
    finally:
        if pool is not None:
            pool.shutdown()
    return {
        "steps": n_steps,
        "records": records,
        "mean_path_count": float(np.mean(path_counts)) if path_counts else 0.0,
    }


def cmd_run(args) -> int:
    try:
        bundle = _load_bundle(args, args.seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except LusimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    scenario = bundle.scenario
    if args.duration is not None:
        scenario = replace(scenario, duration=args.duration)
    log_path = args.out or (bundle.resolve(scenario.channel_log_path)
                            if scenario.channel_log_path else None)
    if log_path is None:
        print("error: no channel log path (scenario.channel_log_path or --out)",
              file=sys.stderr)
        return EXIT_CONFIG
    try:
        spawn_blob = open(args.spawn, "rb").read() if args.spawn else None
        engine = assemble_engine(bundle.gscm, bundle.radio, scenario, bundle.scene,
                                 spawn_blob)
        meta = {
            "scene_hash": engine.mpcs.scene_hash,
            "spawn_seed": engine.mpcs.spawn_seed,
            "scenario_seed": scenario.scenario_seed,
            "carrier_frequency": bundle.radio.carrier_frequency,
            "bandwidth": bundle.radio.bandwidth,
            "fft_bins": bundle.radio.fft_bins,
            "step": scenario.step,
            "duration": scenario.duration,
        }
        with ChannelLogWriter(log_path, meta) as writer:
            summary = _run_steps(engine, scenario, writer)
    except LusimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    summary["log"] = str(log_path)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        bundle = _load_bundle(args, args.seed)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except LusimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        spawn_blob = open(args.spawn, "rb").read() if args.spawn else None
        engine = assemble_engine(bundle.gscm, bundle.radio, bundle.scenario,
                                 bundle.scene, spawn_blob)
    except LusimError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    endpoint = _endpoint_from(args)
    try:
        engine_serve(engine, endpoint)
    except OSError as e:
        print(f"error: cannot bind {endpoint[0]}:{endpoint[1]}: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    return EXIT_OK


def _spread(values, weights) -> float:
    w = np.asarray(weights, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.size <= 1 or w.sum() <= 0:
        return 0.0
    mean = float(np.average(v, weights=w))
    return float(np.sqrt(np.average((v - mean) ** 2, weights=w)))


def _export_row(rec: LogRecord) -> dict:
    gains = [p.avg_gain for p in rec.paths]
    return {
        "timestamp": rec.timestamp,
        "tx_id": rec.tx_id,
        "rx_id": rec.rx_id,
        "path_count": len(rec.paths),
        "total_power": float(np.sum(np.abs(rec.h) ** 2) / rec.n_bins),
        "delay_spread": _spread([p.delay for p in rec.paths], gains),
        "doppler_spread": _spread([p.doppler for p in rec.paths], gains),
    }


def cmd_export(args) -> int:
    try:
        read_log_meta(args.log)
    except (OSError, LusimError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    fields = ["timestamp", "tx_id", "rx_id", "path_count", "total_power",
              "delay_spread", "doppler_spread"]
    writer = None
    if args.format == "csv":
        writer = csv.DictWriter(out, fieldnames=fields)
        writer.writeheader()

    code = EXIT_OK
    try:
        for rec in read_channel_log(args.log):
            if args.tx is not None and rec.tx_id != args.tx:
                continue
            if args.rx is not None and rec.rx_id != args.rx:
                continue
            if args.t_from is not None and rec.timestamp < args.t_from:
                continue
            if args.t_to is not None and rec.timestamp > args.t_to:
                continue
            row = _export_row(rec)
            if writer is not None:
                writer.writerow(row)
            else:
                out.write(json.dumps(row) + "\n")
    except Truncated as e:
        print(f"error: truncated log: {e}", file=sys.stderr)
        code = EXIT_RUNTIME
    finally:
        if out is not sys.stdout:
            out.close()
    return code


# -- argument parsing --------------------------------------------------------------


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--gscm", required=True, help="GSCM/scatterer parameter document")
    p.add_argument("--radio", required=True, help="radio parameter document")
    p.add_argument("--scenario", required=True, help="scenario document")
    p.add_argument("--seed", type=int, default=None,
                   help="override every configured seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lusim",
                                     description="Cell-free radio network simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the three config documents")
    _add_config_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("spawn", help="spawn, filter and save the scatterer set")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output spawn container path")
    p.set_defaults(func=cmd_spawn)

    p = sub.add_parser("run", help="batch-run the scenario and write the channel log")
    _add_config_args(p)
    p.add_argument("--spawn", default=None, help="reuse a saved spawn container")
    p.add_argument("--out", default=None, help="channel log path override")
    p.add_argument("--duration", type=float, default=None, help="duration override (s)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="serve the wire protocol until Shutdown")
    _add_config_args(p)
    p.add_argument("--spawn", default=None, help="reuse a saved spawn container")
    p.add_argument("--endpoint", default=None, help="host:port to bind (default 127.0.0.1:47001)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="summarize a channel log as csv/jsonl")
    p.add_argument("--log", required=True, help="channel log path")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--tx", type=int, default=None, help="filter by transmitter id")
    p.add_argument("--rx", type=int, default=None, help="filter by receiver id")
    p.add_argument("--from", dest="t_from", type=float, default=None,
                   help="start of time range (s)")
    p.add_argument("--to", dest="t_to", type=float, default=None,
                   help="end of time range (s)")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # a downstream pipe consumer (head, grep -m, ...) closed early
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
