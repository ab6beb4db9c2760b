"""Command line entry point for batch figure rendering."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import SCHEMAS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render a hyperkernel experiment CSV into a figure.")
    parser.add_argument("csv", type=Path, help="input table")
    parser.add_argument("--kind", required=True, choices=sorted(SCHEMAS),
                        help="which schema and renderer to use")
    parser.add_argument("--out", required=True, type=Path,
                        help="output image path (format from the extension)")
    parser.add_argument("--dpi", type=int, default=150,
                        help="raster resolution (default 150)")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = render(FigureSpec(csv_path=args.csv, kind=args.kind,
                                   out_path=args.out, dpi=args.dpi))
    except (SchemaError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {result.out_path} ({result.rows} rows)")
    return 0


def run() -> None:
    raise SystemExit(main())
