#!/usr/bin/env python3
"""Print the radial search-window table.

For each input dimension n, the window [r-, r+] holds all but alpha of
the chi_n mass; directional root searches are confined to it.  The
window width settles near sqrt(2) * (z(1-alpha/2) ~ 6.467) as n grows,
which is what makes a fixed-size initial design workable in any
dimension.
"""

import argparse
import time

from sdis.kriging import search_interval


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=1e-10,
                    help="chi mass left outside the window (default 1e-10)")
    ap.add_argument("--dims", type=int, nargs="+",
                    default=[10, 100, 1_000, 10_000, 100_000, 1_000_000],
                    help="input dimensions to tabulate")
    args = ap.parse_args()

    t0 = time.perf_counter()
    rows = [(n, search_interval(n, args.alpha, 1.0)) for n in args.dims]
    elapsed = time.perf_counter() - t0

    print(f"alpha = {args.alpha:g}")
    print(f"{'n':>9}  {'r-':>12}  {'r+':>12}  {'width':>8}")
    for n, iv in rows:
        print(f"{n:>9}  {iv.r_minus:>12.6f}  {iv.r_plus:>12.6f}  {iv.width:>8.4f}")
    print(f"computed in {elapsed * 1e3:.2f} ms")


if __name__ == "__main__":
    main()
