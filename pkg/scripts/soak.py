"""Randomized correctness soak: 3 replicas x 4 partitions, skewed clocks, jitter, a healing cut.

    python scripts/soak.py --set runs=100 --set keep_traces=false
"""

from collections import Counter

from _common import main


def table(res):
    total = {}
    for r in res.runs:
        total.setdefault(r.protocol, Counter()).update(r.verdict["counts"])
    for p, c in sorted(total.items()):
        n = sum(1 for r in res.runs if r.protocol == p)
        print(f"{p:<11} {n} seeds  " + "  ".join(f"{k} {v}" for k, v in sorted(c.items())))


if __name__ == "__main__":
    main("soak", table, __doc__)
