"""Server-side PUT wait against clock skew, two partitions, round-robin writer."""

from _common import main, rows


def table(res):
    waits = rows(res, "put_wait_mean")
    skews = sorted({int(q) for _, q in waits})
    print(f"{'skew':>5} {'hlc-dsv':>9} {'gentlerain':>11}   (mean server wait per PUT, ms)")
    for s in skews:
        print(f"{s:>5} {waits[('hlc-dsv', str(s))]:>9.2f} {waits[('gentlerain', str(s))]:>11.2f}")
    for p in ("hlc-dsv", "gentlerain"):
        print(f"{p}: slope {res.value(p, 'all', 'put_wait_slope'):.3f}")


if __name__ == "__main__":
    main("put-skew", table, __doc__)
