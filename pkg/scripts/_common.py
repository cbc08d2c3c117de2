"""Shared argument handling for the experiment scripts."""

import argparse
import json
import sys
import time
from pathlib import Path

from causalkv.cli import write_outputs
from causalkv.experiments import config_dict, run_preset


def run(preset: str, table, description: str) -> int:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="also write metrics.csv / trace.jsonl / verdict.json here")
    ap.add_argument("--set", action="append", default=[], metavar="FIELD=JSON",
                    help="override a preset field, e.g. --set 'skews=[0,4,8]'")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    overrides = {}
    for item in args.set:
        name, _, raw = item.partition("=")
        overrides[name] = json.loads(raw)
    t = time.perf_counter()
    res = run_preset(preset, args.seed, overrides, workers=args.jobs)
    table(res)
    bad = [r.verdict["label"] for r in res.runs if not r.verdict["ok"]]
    print(f"\n{len(res.runs)} runs in {time.perf_counter() - t:.1f} s, checker: "
          + ("all ok" if not bad else f"FAILED {bad}"))
    if args.out:
        write_outputs(res, Path(args.out), {"preset": preset, "seed": args.seed,
                                            "config": config_dict(preset, overrides)})
    return 1 if bad else 0


def rows(res, metric):
    """{(protocol, param): value} for one metric."""
    return {(p, q): v for p, _, q, m, v in res.rows if m == metric}


def main(preset, table, description):
    sys.exit(run(preset, table, description))
