"""Command-line entry point: ``pbdcover <subcommand> ...``.

Exit codes: 0 success, 1 a check failed, 2 invalid input, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import approx, cover, harness, momentdp
from .errors import BudgetExceeded, InternalInconsistency, InvalidParameter
from .pbd_core import exact_probs, pbd_pmf, tvd

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


def _load_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidParameter(f"cannot read {path}: {exc}") from exc
    try:
        # decimals in the file are read exactly, so 0.1 means 1/10
        return json.loads(text, parse_float=Fraction)
    except json.JSONDecodeError as exc:
        raise InvalidParameter(f"{path} is not valid JSON: {exc}") from exc


def read_pbd(path: str) -> tuple[Fraction, ...]:
    """Parameters from ``{"p": [...]}``, ``{"exact": [[num, den], ...]}`` or a bare list."""
    obj = _load_json(path)
    if isinstance(obj, dict):
        if "exact" in obj:
            obj = obj["exact"]
        elif "p" in obj:
            obj = obj["p"]
        else:
            raise InvalidParameter(f"{path}: expected a 'p' or 'exact' field")
    if not isinstance(obj, list):
        raise InvalidParameter(f"{path}: parameters must be a list")
    return exact_probs(obj)


def _exact_pairs(xs) -> list[list[int]]:
    return [[x.numerator, x.denominator] for x in xs]


def _print_json(obj) -> None:
    print(json.dumps(obj, separators=(", ", ": ")))


SPOT_CHECKS = 20


def _spot_check(elems, n: int, k: int, d: int, seed: int, threshold: int | None) -> int:
    """Round seeded random PBDs of order n; count results the cover does not represent."""
    index = cover.sparse_index(elems, d)
    members = frozenset(elems)
    misses = 0
    for i in range(SPOT_CHECKS):
        family = harness.FAMILIES[i % len(harness.FAMILIES)]
        p = harness.generate_family(family, n, seed * SPOT_CHECKS + i, k)
        elem = cover.round_with_trace(p, k=k, threshold=threshold).element
        misses += not cover.is_represented(elem, members, index, d)
    return misses


def cmd_cover(args) -> int:
    if args.threshold is not None and args.seed is None:
        raise InvalidParameter("--threshold-override only applies to the --seed spot check")
    elems = cover.build_cover(args.n, args.eps, args.budget, k=args.k, d=args.d)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        for e in elems:
            out.write(json.dumps(e.to_json()) + "\n")
    finally:
        if args.output:
            out.close()
    if args.seed is None:
        return EXIT_OK
    k = elems[0].k
    d = args.d if args.d is not None else cover.d_of_eps(args.eps)
    misses = _spot_check(elems, args.n, k, d, args.seed, args.threshold)
    print(f"spot check: {misses} of {SPOT_CHECKS} rounded PBDs not represented", file=sys.stderr)
    return EXIT_CHECK if misses else EXIT_OK


def cmd_round(args) -> int:
    p = read_pbd(args.input)
    tr = cover.round_with_trace(p, args.eps, args.k, args.threshold)
    measured = tvd(pbd_pmf(p), pbd_pmf(tr.element.expand()))
    bound = cover.stage_total_bound(tr.k)
    _print_json({"element": tr.element.to_json(), "branch": tr.branch, "k": tr.k,
                 "measured_tvd": measured, "bound": bound})
    return EXIT_OK if measured <= bound + harness.INEQUALITY_TOL else EXIT_CHECK


def cmd_tv(args) -> int:
    a, b = read_pbd(args.a), read_pbd(args.b)
    print(format(tvd(pbd_pmf(a), pbd_pmf(b)), ".17g"))
    return EXIT_OK


def cmd_bounds(args) -> int:
    p = read_pbd(args.input)
    rows = approx.bound_rows(p, family=args.family, seed=args.seed)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(approx.BoundRow.CSV_HEADER)
    failed = False
    for r in rows:
        w.writerow(r.csv_fields())
        failed |= r.measured_tvd > r.bound_value + harness.INEQUALITY_TOL
    return EXIT_CHECK if failed else EXIT_OK


def cmd_expand(args) -> int:
    obj = _load_json(args.input)
    if not isinstance(obj, dict):
        raise InvalidParameter("expected one cover element object")
    elem = cover.element_from_json(obj)
    xs = elem.expand()
    _print_json({"form": elem.form, "k": elem.k, "p": [float(x) for x in xs], "exact": _exact_pairs(xs)})
    return EXIT_OK


def cmd_solve(args) -> int:
    obj = _load_json(args.input)
    if not isinstance(obj, dict):
        raise InvalidParameter("expected a moment-system object")
    system = momentdp.MomentSystem.from_json(obj)
    sol = momentdp.solve_moment_system(system, budget=args.budget)
    if sol is None:
        print("infeasible")
    else:
        _print_json({"p": _exact_pairs(sol)})
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = harness.CertifyConfig(master_seed=args.master_seed, timing=args.timing)
    reports = harness.run_suite(args.only, args.trials, cfg)
    if args.csv:
        harness.write_csv(reports, args.csv)
    if args.jsonl:
        harness.write_jsonl(reports, args.jsonl)
    failed = False
    for name, (count, fails, margin) in harness.summarize(reports).items():
        status = "PASS" if fails == 0 else "FAIL"
        print(f"{status} {name}: {count} trials, {fails} failures, min margin {margin:.3g}")
        failed |= fails > 0
    return EXIT_CHECK if failed else EXIT_OK


def _k_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, help="target accuracy; k = ceil(41/eps)")
    p.add_argument("--k", "--k-override", dest="k", type=int, help="grid parameter, overriding --eps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbdcover", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cover", help="write a cover of PBDs of order n as JSON lines",
                       description="Every PBD of order n is within 41/k of a k-sparse or binomial-form "
                                   "element, and sparse elements with equal moment profiles up to d are "
                                   "interchangeable; this writes one sparse element per realizable profile "
                                   "plus all binomial-form elements.")
    p.add_argument("--n", type=int, required=True)
    _k_args(p)
    p.add_argument("--d", "--d-override", dest="d", type=int, help="number of matched power sums")
    p.add_argument("--budget", type=int, default=cover.DEFAULT_COVER_BUDGET)
    p.add_argument("--seed", type=int,
                   help=f"after writing, round {SPOT_CHECKS} seeded random PBDs and check each is represented")
    p.add_argument("--threshold-override", dest="threshold", type=int,
                   help="sparse/binomial branch point for the spot check (test use; default k^3)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("round", help="round a PBD onto a cover element",
                       description="Every PBD is within 41/k of an element in k-sparse or (n,k)-binomial "
                                   "form; prints that element and the measured distance.")
    p.add_argument("input", help='JSON file {"p": [...]}')
    _k_args(p)
    p.add_argument("--threshold-override", dest="threshold", type=int,
                   help="sparse/binomial branch point (test use; default k^3)")
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("tv", help="total variation distance between two PBDs")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_tv)

    p = sub.add_parser("bounds", help="Poisson, Binomial and translated-Poisson bounds as CSV",
                       description="Prints the Le Cam, Ehm and Roellin error bounds next to the measured "
                                   "distance each one controls.")
    p.add_argument("input")
    p.add_argument("--family", default="input")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("expand", help="explicit parameter vector of a cover element")
    p.add_argument("input", help="JSON file holding one cover element")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("solve-moments", help="solve a power-sum moment system exactly",
                       description="Finds grid probabilities with prescribed class counts and low/high "
                                   "power sums, or prints 'infeasible'.")
    p.add_argument("input")
    p.add_argument("--budget", type=int, default=momentdp.DEFAULT_STATE_BUDGET)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run the randomized certification suite")
    p.add_argument("--only", action="append", choices=sorted(harness.REGISTRY))
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--csv")
    p.add_argument("--jsonl")
    p.add_argument("--timing", action="store_true", help="record wall-clock runtime_ms (not deterministic)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InvalidParameter as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InternalInconsistency as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
