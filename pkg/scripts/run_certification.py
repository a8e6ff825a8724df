"""Run every registered check and write CSV and JSON-lines evidence tables."""

import argparse
import sys
import time
from pathlib import Path

from pbdcover import harness


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--only", action="append", choices=sorted(harness.REGISTRY))
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = harness.CertifyConfig(master_seed=args.master_seed)
    start = time.perf_counter()
    reports = harness.run_suite(args.only, args.trials, cfg)
    harness.write_csv(reports, out / "certification.csv")
    harness.write_jsonl(reports, out / "certification.jsonl")

    failed = 0
    for name, (count, fails, margin) in sorted(harness.summarize(reports).items()):
        print(f"{'PASS' if fails == 0 else 'FAIL'} {name:36s} trials={count:5d} failures={fails} min_margin={margin:.3g}")
        failed += fails
    print(f"{len(reports)} trials in {time.perf_counter() - start:.1f} s; tables in {out}/")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
