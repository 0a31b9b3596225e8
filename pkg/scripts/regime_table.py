"""Print the exponent-regime table (class, guarantee, max obstruction order).

    python scripts/regime_table.py --m 0 1 2 3 4 --n 1 2 3 --p 1 2 3 inf
"""

import argparse
import csv
import sys

from remova.regimes import bochner_guarantee, classify, max_delta_order


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", nargs="+", type=int, default=[0, 1, 2, 3, 4])
    ap.add_argument("--n", nargs="+", type=int, default=[1, 2, 3])
    ap.add_argument("--p", nargs="+", default=["1", "2", "3", "inf"])
    args = ap.parse_args(argv)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["m", "n", "p", "class", "guarantee", "max_delta_order"])
    for m in args.m:
        for n in args.n:
            for p in args.p:
                k = max_delta_order(m, n, p)
                w.writerow([m, n, p, classify(m, n, p).value, bochner_guarantee(m, n, p), "" if k is None else k])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
