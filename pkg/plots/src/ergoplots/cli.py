"""Command line front end: plots <kind> --in <dir> --out <file>."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import KINDS, FigureSpec, render
from .io import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render a figure or table from an analysis run directory.",
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="indir", required=True,
                        help="run directory holding the CSV artifacts")
    parser.add_argument("--out", required=True,
                        help="output file (.svg or .pdf; any text suffix for table1)")
    parser.add_argument("--no-offsets", action="store_true",
                        help="fig2 only: draw every lattice on its true time axis")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, indir=Path(args.indir), out=Path(args.out),
                      offsets=not args.no_offsets)
    try:
        render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
