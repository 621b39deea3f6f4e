"""Command-line entry point: ``flipcert {certify, metrics, oracle-check}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .checks import run_all
from .core import (
    CertConfig,
    CertError,
    CertificateOutcome,
    NumericFailure,
    SmallCViolation,
    load_dataset,
    parse_count,
)
from .pipeline import MODES, KernelSpec, RobustnessReport, evaluate

EXIT_OK, EXIT_CHECK_FAILED, EXIT_VALIDATION, EXIT_SMALL_C, EXIT_NUMERIC = 0, 1, 2, 3, 4

log = logging.getLogger("flipcert")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flipcert", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    cert = sub.add_parser("certify", help="certify a test set against label flips")
    cert.add_argument("--train", required=True, help="training dataset manifest")
    cert.add_argument("--test", required=True, help="test dataset manifest")
    cert.add_argument("--partitions", type=int, required=True, help="number of partitions Np")
    cert.add_argument("--loss", choices=("svm", "regression"), default="regression")
    cert.add_argument("--C", type=float, default=1e-3, help="SVM regularization (small-C regime)")
    cert.add_argument("--lambda", dest="lam", type=float, default=1.0, help="ridge regularization")
    cert.add_argument("--kernel", default="linear", help="'linear' or 'precomputed:PATH'")
    cert.add_argument("--mode", choices=MODES, default="whitebox")
    cert.add_argument("--out", required=True, help="results JSON path")
    cert.add_argument("--threads", type=int, default=1)
    cert.add_argument("--limit", type=int, default=None, help="certify only the first N test samples")
    cert.add_argument("--tol", type=float, default=0.0, help="score comparison tolerance")

    met = sub.add_parser("metrics", help="certified-accuracy curve and MCR from results")
    met.add_argument("--in", dest="inp", required=True)
    met.add_argument("--curve", required=True, help="output CSV path")
    met.add_argument("--summary", required=True, help="output JSON path")

    chk = sub.add_parser("oracle-check", help="cross-check certificates against brute force")
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--trials", type=int, default=100)
    return parser


def cmd_certify(args) -> int:
    config = CertConfig(loss=args.loss, C=args.C, lam=args.lam, tol=args.tol)
    report = evaluate(
        load_dataset(args.train),
        load_dataset(args.test),
        args.partitions,
        config,
        KernelSpec.parse(args.kernel),
        args.mode,
        limit=args.limit,
        threads=args.threads,
    )
    with open(args.out, "w") as fh:
        json.dump(report.to_json(), fh, indent=1)
        fh.write("\n")
    log.info("wrote %d outcomes to %s", len(report.outcomes), args.out)
    return EXIT_OK


def read_results(path) -> RobustnessReport:
    with open(path) as fh:
        doc = json.load(fh)
    outcomes = []
    for rec in doc["results"]:
        bb = rec.get("blackbox_radius")
        outcomes.append(
            CertificateOutcome(
                rec["index"],
                rec["predicted"],
                parse_count(rec["radius_lb"]),
                parse_count(rec["radius_ub"]),
                rec.get("correct"),
                None if bb is None else int(bb),
            )
        )
    return RobustnessReport(outcomes, doc.get("header", {}))


def cmd_metrics(args) -> int:
    try:
        report = read_results(args.inp)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise CertError(f"cannot read results {args.inp}: {exc}") from exc
    with open(args.curve, "w", newline="") as fh:
        fh.write(report.curve_csv())
    with open(args.summary, "w") as fh:
        json.dump({**report.summary(), "header": report.header}, fh, indent=1)
        fh.write("\n")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    results = run_all(args.seed, args.trials)
    for res in results:
        status = "PASS" if res.ok else f"FAIL ({len(res.failures)})"
        print(f"{status:10s} {res.name} [{res.trials} trials]")
        for msg in res.failures[:5]:
            print(f"    {msg}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"certify": cmd_certify, "metrics": cmd_metrics, "oracle-check": cmd_oracle_check}[args.command]
    try:
        return handler(args)
    except SmallCViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SMALL_C
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except CertError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
