"""Command line: single runs and seed x mode sweeps.

Exit codes: 0 success, 1 configuration error, 2 runtime invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import ConfigError, InvariantViolation
from .metrics import format_summary, time_series, write_time_series, write_trace
from .network import Network
from .scenario import load_scenario
from .sentinel import MODES

log = logging.getLogger("manetsim")

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2

SWEEP_COLUMNS = (
    "seed", "mode", "throughput_bps", "pdr", "mean_delay_s", "data_dropped",
    "tp", "fp", "fn", "time_to_detection_s",
)


def run(scenario, out_dir):
    """Simulate ``scenario`` and write trace.tr, summary.txt and timeseries.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = Network(scenario)
    summary = net.run()
    with open(out / "trace.tr", "w", encoding="utf-8") as fh:
        write_trace(net.trace, fh)
    (out / "summary.txt").write_text(format_summary(summary), encoding="utf-8")
    with open(out / "timeseries.csv", "w", encoding="utf-8") as fh:
        write_time_series(time_series(net.trace, scenario.sim_duration_s), fh)
    return summary


def parse_seeds(text: str) -> list[int]:
    """``3`` or ``1..5`` (inclusive) or ``1,4,9``."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                a, b = part.split("..", 1)
                lo, hi = int(a), int(b)
                if hi < lo:
                    raise ConfigError(f"empty seed range {part!r}", key="seeds")
                seeds.extend(range(lo, hi + 1))
            elif part:
                seeds.append(int(part))
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}", key="seeds") from None
    if not seeds:
        raise ConfigError("seed list is empty", key="seeds")
    return seeds


def parse_modes(text: str) -> list[str]:
    modes = [m.strip() for m in text.split(",") if m.strip()]
    if not modes:
        raise ConfigError("mode list is empty", key="modes")
    for m in modes:
        if m not in MODES:
            raise ConfigError(f"unknown mode {m!r}; expected one of {', '.join(MODES)}", key="modes")
    return modes


def sweep_row(seed, mode, s) -> dict:
    return {
        "seed": seed, "mode": mode,
        "throughput_bps": s.throughput_bps, "pdr": s.pdr,
        "mean_delay_s": s.mean_e2e_delay_s, "data_dropped": s.data_dropped,
        "tp": s.tp, "fp": s.fp, "fn": s.fn,
        "time_to_detection_s": s.time_to_detection_s,
    }


def mean_rows(rows, modes):
    out = []
    for mode in modes:
        member = [r for r in rows if r["mode"] == mode]
        if not member:
            continue
        row = {"seed": "mean", "mode": mode}
        for col in SWEEP_COLUMNS[2:]:
            vals = [r[col] for r in member if r[col] is not None]
            row[col] = statistics.fmean(vals) if vals else None
        out.append(row)
    return out


def write_aggregate(path, rows, modes):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in list(rows) + mean_rows(rows, modes):
            w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c])
                        for c in SWEEP_COLUMNS])


def _sweep_one(config, overrides, seed, mode, out_dir):
    sc = load_scenario(config, overrides).with_seed(seed).with_mode(mode)
    return run(sc, out_dir)


def sweep(config, seeds, modes, out_dir, overrides=(), jobs=1):
    """One run per (seed, mode); writes ``aggregate.csv`` and returns its rows.

    If a run fails, the rows finished so far are still written before the
    exception propagates.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # parse once up front so a bad config fails before any run starts
    load_scenario(config, overrides)
    plan = [(seed, mode) for seed in seeds for mode in modes]
    results = {}
    try:
        if jobs <= 1:
            for seed, mode in plan:
                results[(seed, mode)] = _sweep_one(
                    config, overrides, seed, mode, out / f"{mode}-seed{seed}")
        else:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futs = {
                    key: pool.submit(_sweep_one, config, list(overrides), key[0], key[1],
                                     out / f"{key[1]}-seed{key[0]}")
                    for key in plan
                }
                for key in plan:
                    results[key] = futs[key].result()
    finally:
        rows = [sweep_row(seed, mode, results[(seed, mode)])
                for seed, mode in plan if (seed, mode) in results]
        write_aggregate(out / "aggregate.csv", rows, modes)
    return rows


def build_parser():
    p = argparse.ArgumentParser(prog="manetsim", description="AODV black hole and detector simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--config", default="table1", help="config file or bundled scenario name")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", required=True)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")

    s = sub.add_parser("sweep", help="run every (seed, mode) pair")
    s.add_argument("--config", default="table1")
    s.add_argument("--seeds", required=True, help="e.g. 1..5")
    s.add_argument("--modes", default="watchdog,iwatchdog")
    s.add_argument("--out", required=True)
    s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--jobs", type=int, default=1)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            sc = load_scenario(args.config, args.override)
            if args.seed is not None:
                sc = sc.with_seed(args.seed)
            s = run(sc, args.out)
            print(format_summary(s), end="")
        else:
            seeds = parse_seeds(args.seeds)
            modes = parse_modes(args.modes)
            jobs = args.jobs if args.jobs > 0 else (os.cpu_count() or 1)
            rows = sweep(args.config, seeds, modes, args.out, args.override, jobs)
            log.info("sweep finished: %d runs", len(rows))
            print(Path(args.out) / "aggregate.csv")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
