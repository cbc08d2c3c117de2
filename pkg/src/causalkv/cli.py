"""Command line entry point.

    causalkv run-experiment put-skew --seed 1 --out out/put-skew
    causalkv check out/put-skew/trace.jsonl
    causalkv presets
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from .checker import check_trace, write_verdict
from .core import ConfigError
from .experiments import PRESETS, config_dict, run_preset
from .simnet import load_jsonl

log = logging.getLogger("causalkv")

EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2


def write_outputs(result, out: Path, meta: dict, trace: bool = True) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["protocol", "preset", "param", "metric", "value"])
        for row in result.rows:
            w.writerow([*row[:4], _fmt(row[4])])
    if trace:
        with open(out / "trace.jsonl", "w") as fh:
            offset = 0
            for run in result.runs:
                for e in run.trace:
                    fh.write(json.dumps({"seq": e.seq + offset, "t": e.t, "kind": e.kind,
                                         "actor": e.actor, "payload": e.payload},
                                        sort_keys=True, separators=(",", ":")))
                    fh.write("\n")
                offset += len(run.trace)
    verdict = {
        "ok": result.ok,
        **meta,
        "runs": [run.verdict for run in result.runs],
    }
    with open(out / "verdict.json", "w") as fh:
        write_verdict(verdict, fh)
    return verdict


def _fmt(v):
    if isinstance(v, float):
        return repr(round(v, 6))
    return v


def split_runs(events: list) -> list[list]:
    """A trace file may hold several runs, each opened by a ``run`` event."""
    runs: list = []
    for e in events:
        if e.kind == "run" or not runs:
            runs.append([])
        runs[-1].append(e)
    return runs


def cmd_run(args) -> int:
    overrides = {}
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(overrides, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = config_dict(args.preset, overrides)
    log.info("running %s seed=%d", args.preset, args.seed)
    result = run_preset(args.preset, args.seed, overrides, workers=args.jobs)
    out = Path(args.out or f"out/{args.preset}")
    verdict = write_outputs(result, out, {"preset": args.preset, "seed": args.seed, "config": cfg},
                            trace=not args.no_trace)
    bad = [r["label"] for r in verdict["runs"] if not r["ok"]]
    for label in bad:
        log.error("checker failed: %s", label)
    print(f"{args.preset}: {len(result.runs)} runs, {'ok' if not bad else f'{len(bad)} FAILED'} -> {out}")
    return EXIT_FAILED_CHECK if bad else 0


def cmd_check(args) -> int:
    with open(args.trace) as fh:
        events = load_jsonl(fh)
    verdicts = [check_trace(run) for run in split_runs(events)]
    report = {"ok": all(v["ok"] for v in verdicts), "runs": verdicts}
    write_verdict(report, sys.stdout)
    return 0 if report["ok"] else EXIT_FAILED_CHECK


def cmd_presets(args) -> int:
    for name in PRESETS:
        print(name, json.dumps(config_dict(name)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalkv", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run-experiment", help="run a preset on both stores and check every trace")
    r.add_argument("preset", choices=sorted(PRESETS))
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="output directory (default out/<preset>)")
    r.add_argument("--config", help="JSON file overriding preset fields")
    r.add_argument("--jobs", type=int, default=1, help="simulations to run in parallel")
    r.add_argument("--no-trace", action="store_true", help="skip writing trace.jsonl")
    r.set_defaults(fn=cmd_run)

    c = sub.add_parser("check", help="check a trace file and print the verdict")
    c.add_argument("trace")
    c.set_defaults(fn=cmd_check)

    s = sub.add_parser("presets", help="list presets with their default settings")
    s.set_defaults(fn=cmd_presets)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"causalkv: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
