"""Read-only transactions with one of six partitions slowed down."""

from _common import main, rows


def table(res):
    inv, non = rows(res, "rotx_involving_p90"), rows(res, "rotx_noninvolving_p90")
    parked = rows(res, "rotx_parked")
    print(f"{'slow':>5} {'protocol':<11} {'involving p90':>14} {'non-involving p90':>18} {'parked':>7}")
    for (p, s), v in inv.items():
        print(f"{s:>5} {p:<11} {v:>14.1f} {non[(p, s)]:>18.1f} {parked[(p, s)]:>7}")


if __name__ == "__main__":
    main("rotx-slow", table, __doc__)
