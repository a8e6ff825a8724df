"""Worst observed rounding error against 41/k as the grid parameter grows."""

import argparse

import numpy as np

from pbdcover import cover, harness
from pbdcover.pbd_core import pbd_pmf, tvd


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 3, 4, 6, 8, 12, 20, 41, 60])
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print("k,bound,worst_stage1,worst_stage2,worst_total,sparse_share")
    for k in args.k:
        rng = np.random.default_rng([args.seed, k])
        w1 = w2 = wt = 0.0
        sparse = 0
        for trial in range(args.trials):
            fam = harness.FAMILIES[trial % len(harness.FAMILIES)]
            p = harness.generate_family(fam, args.n, int(rng.integers(2**31)), k)
            tr = cover.round_with_trace(p, k=k)
            orig = pbd_pmf(p)
            w1 = max(w1, tvd(orig, pbd_pmf(tr.stage1)))
            w2 = max(w2, tvd(pbd_pmf(tr.stage1), pbd_pmf(tr.stage2)))
            wt = max(wt, tvd(orig, pbd_pmf(tr.element.expand())))
            sparse += tr.branch == "sparse"
        print(f"{k},{41 / k:.4f},{w1:.4f},{w2:.4f},{wt:.4f},{sparse / args.trials:.2f}")


if __name__ == "__main__":
    main()
