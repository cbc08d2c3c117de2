"""Request latency when each request fans out into F dependent operations."""

from _common import main, rows


def table(res):
    lat = rows(res, "request_latency_mean")
    ratio = rows(res, "latency_ratio")
    print(f"{'F':>4} {'hlc-dsv':>9} {'gentlerain':>11} {'ratio':>7}   (mean request latency, ms)")
    for (p, f), v in ratio.items():
        print(f"{f:>4} {lat[('hlc-dsv', f)]:>9.1f} {lat[('gentlerain', f)]:>11.1f} {v:>7.2f}")


if __name__ == "__main__":
    main("query-amp", table, __doc__)
