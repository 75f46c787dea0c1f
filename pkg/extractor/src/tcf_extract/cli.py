"""Command line entry points: extract and verify."""

from __future__ import annotations

import argparse
import sys

from .dataset import DatasetError
from .extract import ExtractionError, ExtractionJob, extract
from .verify import verify


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcf-extract",
        description="Export per-token transformer hidden layers to TCF1 files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run the encoder and write features")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["tsv_labeled", "pairs_json"],
                   default="tsv_labeled")
    p.add_argument("--out", required=True)
    p.add_argument("--model", default="bert-base-uncased",
                   help="model id or local directory")
    p.add_argument("--pool", choices=["first", "mean"], default="first")
    p.add_argument("--layers", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=16)

    p = sub.add_parser("verify", help="check a feature file against its dataset")
    p.add_argument("--features", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=["tsv_labeled", "pairs_json"],
                   default="tsv_labeled")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "extract":
            job = ExtractionJob(model=args.model, data=args.data, out=args.out,
                                format=args.format, pool=args.pool,
                                layers=args.layers, batch_size=args.batch_size)
            result = extract(job)
            print(f"wrote {result.written} records "
                  f"({len(result.skipped)} skipped, hidden={result.hidden})")
            return 0
        report = verify(args.features, args.data, args.format)
        print(report.summary())
        return 0 if report.ok else 1
    except (DatasetError, ExtractionError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
