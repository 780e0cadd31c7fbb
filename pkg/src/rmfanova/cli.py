"""Command-line interface.

``rmfanova test DATA.csv`` smooths the curves and runs the requested tests;
``rmfanova simulate CONFIG.ini`` runs Monte Carlo studies and writes CSV.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3
numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .design import RMDataset
from .dmm import dmm_test
from .errors import (FanovaError, InvalidConfigurationError, InvalidDatasetError,
                     InvalidHypothesisError, NotEstimableError, SingularErrorMatrixError,
                     SingularFitError)
from .io import choose_basis, ingest, smooth_collection
from .mmm import mmm_test
from .permutation import PermutationConfig, permutation_test
from .report import TestReport, format_reports
from .simulation import load_config, run_study, write_csv, write_records

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rmfanova", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("test", help="test a curve dataset")
    t.add_argument("data", type=Path, help="delimited file with subject,group,treatment,t,value")
    t.add_argument("--basis-dim", type=int, help="basis dimension")
    t.add_argument("--basis-order", type=int, default=4, help="B-spline order (default 4, cubic)")
    t.add_argument("--gcv", type=_int_list, help="candidate dimensions for GCV, e.g. 10,14,18")
    t.add_argument("--method", choices=("dmm", "mmm", "perm", "auto"), default="auto")
    t.add_argument("--hypothesis", choices=("interaction", "group", "treatment", "all"),
                   default="all")
    t.add_argument("--perm-f", type=int, default=999, help="permutation replicates")
    t.add_argument("--perm-stat", choices=("W", "LH", "P", "R"), default="P")
    t.add_argument("--perm-engine", choices=("dmm", "mmm"), default="mmm")
    t.add_argument("--perm-corrected", action="store_true",
                   help="use (1+count)/(1+F) instead of count/F")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--adjust", choices=("none", "auto", "always"), default="auto")
    t.add_argument("--jobs", type=int, default=1, help="worker processes for permutations")
    t.add_argument("--out", type=Path, help="write JSON-lines report records here")

    s = sub.add_parser("simulate", help="run Monte Carlo studies from a config file")
    s.add_argument("config", type=Path)
    s.add_argument("--out", type=Path, help="CSV output (default stdout)")
    s.add_argument("--records", type=Path, help="JSON-lines study records")
    s.add_argument("--jobs", type=int, default=1)
    return parser


def _hypotheses(choice: str, g: int) -> tuple[list[str], list[str]]:
    if choice != "all":
        return [choice], []
    if g < 2:
        return ["treatment"], ["single group: only the treatment hypothesis is testable"]
    return ["interaction", "group", "treatment"], []


def run_tests(dataset: RMDataset, args) -> list[TestReport]:
    """All reports requested by the parsed `args` for `dataset`."""
    hyps, notes = _hypotheses(args.hypothesis, dataset.g)
    perm = PermutationConfig(args.perm_f, args.seed, args.perm_stat, args.perm_engine.upper(),
                             args.perm_corrected, args.jobs)
    reports = []
    dmm_ok = dataset.n > dataset.p * dataset.m
    for hyp in hyps:
        if args.method == "dmm":
            reports.append(dmm_test(dataset, hyp))
        elif args.method == "mmm":
            reports.append(mmm_test(dataset, hyp, args.adjust, args.alpha))
        elif args.method == "perm":
            reports.append(permutation_test(dataset, hyp, perm))
        else:
            ladder = []
            if dmm_ok:
                ladder.append(dmm_test(dataset, hyp))
            plain = mmm_test(dataset, hyp, "none", args.alpha)
            if not dmm_ok:
                plain.notes.append(f"DMM infeasible: n={dataset.n} <= p*m={dataset.p * dataset.m}; "
                                   "MMM employed")
            ladder.append(plain)
            ladder.append(mmm_test(dataset, hyp, "auto" if args.adjust == "none" else args.adjust,
                                   args.alpha))
            ladder.append(permutation_test(dataset, hyp, perm))
            reports.extend(ladder)
    if reports and notes:
        reports[0].notes.extend(notes)
    return reports


def cmd_test(args) -> int:
    coll = ingest(args.data)
    basis = choose_basis(coll, args.basis_dim, args.gcv, args.basis_order)
    dataset = smooth_collection(coll, basis)
    reports = run_tests(dataset, args)
    header = (f"# {args.data.name}: n={dataset.n} g={dataset.g} m={dataset.m} "
              f"p={basis.dimension} (order {basis.order}, domain {basis.domain[0]:g}..{basis.domain[1]:g})")
    sys.stdout.write(header + "\n\n" + format_reports(reports))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for r in reports:
                fh.write(r.to_json() + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfigurationError(f"cannot read {args.config}: {exc}") from exc
    jobs = load_config(text)
    results = [run_study(spec, methods, args.jobs) for spec, methods in jobs]
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(results, fh)
    else:
        sys.stdout.write(write_csv(results))
    if args.records:
        with open(args.records, "w", encoding="utf-8") as fh:
            write_records(results, fh)
    for res in results:
        for note in res.notes:
            print(f"{res.spec.name}: {note}", file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "test" and args.basis_dim is not None and args.gcv:
            parser.error("--basis-dim and --gcv are mutually exclusive")
    except SystemExit as exc:
        # argparse exits on --help/--version (0) and on usage errors
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "test":
            return cmd_test(args)
        return cmd_simulate(args)
    except (SingularErrorMatrixError, SingularFitError, NotEstimableError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidDatasetError, InvalidConfigurationError, InvalidHypothesisError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FanovaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
