"""Command-line entry points: export a table, report its similarities.

Exit codes: 0 success, 2 validation failure, 3 model failure (the encoder
cannot be resolved or run).
"""

from __future__ import annotations

import argparse
import json
import sys

from .descriptions import LENGTH_CLASSES, default_descriptions, read_descriptions
from .encode import DEFAULT_MODEL_ID
from .errors import ModelError, ValidationError
from .export import export_table
from .report import format_report_csv, report_from_file


def cmd_export(args) -> int:
    if args.descriptions:
        descriptions = read_descriptions(args.descriptions)
    else:
        descriptions = default_descriptions()
    if args.pca_k is not None and args.pca_k < 1:
        raise ValidationError(f"--pca-k must be >= 1, got {args.pca_k}")
    summary = export_table(
        descriptions,
        args.model,
        args.length,
        args.out,
        pca_k=args.pca_k,
        revision=args.revision,
    )
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    text = format_report_csv(report_from_file(args.table))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opembed",
        description="Export operator embedding tables from descriptive sentences",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_export = sub.add_parser("export", help="encode descriptions into a table file")
    p_export.add_argument(
        "--descriptions", help="descriptions CSV (default: bundled set)"
    )
    p_export.add_argument(
        "--model", default=DEFAULT_MODEL_ID, help="pretrained model identifier"
    )
    p_export.add_argument("--revision", help="model revision to pin")
    p_export.add_argument(
        "--length",
        choices=LENGTH_CLASSES,
        default="short",
        help="sentence length class (default: short)",
    )
    p_export.add_argument(
        "--pca-k", type=int, help="reduce vectors to k principal components"
    )
    p_export.add_argument("--out", required=True, help="output table JSON path")
    p_export.set_defaults(func=cmd_export)

    p_report = sub.add_parser(
        "report", help="pairwise cosine similarities of a table, CSV"
    )
    p_report.add_argument("--table", required=True, help="table JSON to analyze")
    p_report.add_argument("--out", help="output CSV path (default: stdout)")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
