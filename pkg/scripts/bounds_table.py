"""Le Cam, Ehm and Roellin bounds next to measured distances, over the test families."""

import argparse
import csv
import sys

from pbdcover import approx, harness
from pbdcover.errors import DegenerateInput


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[5, 10, 20, 40])
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(approx.BoundRow.CSV_HEADER)
    for family in harness.FAMILIES:
        for n in args.n:
            for seed in range(args.seeds):
                p = harness.generate_family(family, n, seed)
                try:
                    rows = approx.bound_rows(p, family=family, seed=seed)
                except DegenerateInput:
                    continue
                for r in rows:
                    w.writerow(r.csv_fields())


if __name__ == "__main__":
    main()
