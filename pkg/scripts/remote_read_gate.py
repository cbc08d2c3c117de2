"""Compare serving remote versions as soon as their dependencies are stable
("hlc-dsv-literal") with also waiting for the version itself ("hlc-dsv").

Prints the stable-vector safety audit over soak seeds and the outcome of the
scripted stale-dependency execution.
"""

import argparse
from collections import Counter

from causalkv.checker import check_trace
from causalkv.experiments import Soak, soak_config
from causalkv.protocols import by_name
from causalkv.scenarios import stale_dependency
from causalkv.simnet import Simulation
from causalkv.workloads import soak

PROTOCOLS = ("hlc-dsv-literal", "hlc-dsv", "gentlerain")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    cfg = Soak()
    print(f"soak, {args.seeds} seeds: runs with a failing audit / total flagged entries")
    for p in PROTOCOLS:
        runs, counts = 0, Counter()
        for s in range(args.seeds):
            sim = Simulation(soak_config(cfg, s), by_name(p)).run(soak(cfg.M, cfg.N, cfg.ops, s))
            v = check_trace(sim.trace)
            runs += not v["ok"]
            counts.update({k: n for k, n in v["counts"].items() if n})
        print(f"  {p:<16} {runs}/{args.seeds}  {dict(counts) or '-'}")
    print("stale-dependency scenario: violations by check")
    for p in PROTOCOLS:
        config, programs = stale_dependency()
        v = check_trace(Simulation(config, by_name(p)).run(programs).trace)
        print(f"  {p:<16} {({k: n for k, n in v['counts'].items() if n}) or 'none'}")


if __name__ == "__main__":
    main()
