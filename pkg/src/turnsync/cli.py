"""Command-line entry point: ``turnsync run | analyze | sweep | validate``.

Exit status: 0 on success, 1 on usage errors (bad flags, unreadable paths),
2 on validation errors (bad config or trace contents).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from turnsync.analysis import AGGREGATE_COLUMNS, aggregate_row, analyze, report_file
from turnsync.config import SimConfig, load_config, serialize_config
from turnsync.engine import run
from turnsync.errors import ConfigError, TraceFormatError, UsageError
from turnsync.traceio import read_trace, write_trace

log = logging.getLogger("turnsync")

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 1, 2


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageExit(f"{self.prog}: {message}")


def _seed_range(text: str) -> range:
    m = re.fullmatch(r"(\d+)\.\.(\d+)", text)
    if not m or int(m.group(1)) > int(m.group(2)):
        raise argparse.ArgumentTypeError(f"expected A..B with A <= B, got {text!r}")
    return range(int(m.group(1)), int(m.group(2)) + 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="turnsync", description="Turn-taking simulator and synchrony analysis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and write its trace")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--ticks", type=int)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("analyze", help="compute a synchrony report from a trace")
    p.add_argument("--trace", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--lag", type=int)

    p = sub.add_parser("sweep", help="independent runs over a seed range")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seeds", required=True, type=_seed_range)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("validate", help="parse a config and print it fully resolved")
    p.add_argument("--config", required=True, type=Path)
    return parser


def _analyze_to(trace_path: Path, out: Path, lag: int | None = None):
    started = time.perf_counter()
    trace = read_trace(trace_path)
    digest = _sha256(trace_path)
    report = analyze(trace, lag=lag)
    doc = report_file(trace, report, digest, time.perf_counter() - started)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    out.with_suffix(".csv").write_text(report.to_csv(), encoding="utf-8")
    return trace, report


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _sweep_one(config: SimConfig, seed: int, out_dir: str) -> dict:
    out = Path(out_dir)
    trace_path = out / f"trace_{seed}.jsonl"
    write_trace(run(config.with_run(seed=seed)), trace_path)
    trace, report = _analyze_to(trace_path, out / f"report_{seed}.json")
    return aggregate_row(seed, trace, report)


def cmd_run(args) -> int:
    config = load_config(args.config).with_run(ticks=args.ticks, seed=args.seed)
    trace = run(config)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    digest = write_trace(trace, args.out)
    log.info("wrote %d ticks to %s (sha256 %s)", len(trace.records) - 1, args.out, digest[:12])
    return EXIT_OK


def cmd_analyze(args) -> int:
    _analyze_to(args.trace, args.out, args.lag)
    log.info("wrote report %s", args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    args.out.mkdir(parents=True, exist_ok=True)
    seeds = list(args.seeds)
    if args.jobs < 1:
        raise _UsageExit("--jobs must be >= 1")
    if args.jobs == 1 or len(seeds) == 1:
        rows = [_sweep_one(config, s, str(args.out)) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=min(args.jobs, len(seeds))) as pool:
            rows = list(pool.map(_sweep_one, [config] * len(seeds), seeds, [str(args.out)] * len(seeds)))
    with open(args.out / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in sorted(rows, key=lambda r: r["seed"]):
            w.writerow({k: "" if v is None else v for k, v in row.items()})
    converged = sum(r["converged"] for r in rows)
    print(f"converged: {converged}/{len(rows)} seeds")
    return EXIT_OK


def cmd_validate(args) -> int:
    sys.stdout.write(serialize_config(load_config(args.config)))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "analyze": cmd_analyze, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except _UsageExit as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, TraceFormatError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
