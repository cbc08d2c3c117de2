"""A and B share a counter; C is moved between locations."""

from _common import main, rows


def table(res):
    vis = rows(res, "visibility_mean")
    ups = rows(res, "updates_per_s")
    print(f"{'C at':<11} {'hlc-dsv':>9} {'gentlerain':>11}   (A<->B visibility ms / updates per s)")
    for (p, loc), v in vis.items():
        if p == "hlc-dsv":
            g = vis[("gentlerain", loc)]
            print(f"{loc:<11} {v:>9.1f} {g:>11.1f}   {ups[(p, loc)]:.0f} / {ups[('gentlerain', loc)]:.0f}")


if __name__ == "__main__":
    main("visibility", table, __doc__)
