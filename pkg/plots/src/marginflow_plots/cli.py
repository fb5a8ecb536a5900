"""marginflow-plot: figures from run artifacts."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marginflow-plot",
        description="Render margin/rate/direction/KKT figures from trajectory CSVs",
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--csv", required=True, nargs="+", help="trajectory CSV paths")
    parser.add_argument("--summary", default=None, help="summary.json of the run")
    parser.add_argument("--out", required=True, help="output figure path")
    parser.add_argument("--format", default=None, choices=("png", "svg"),
                        help="output format (default from --out extension)")
    parser.add_argument("--degree", type=int, default=None,
                        help="homogeneity degree for the rate overlay")
    parser.add_argument("--xscale", default="log")
    parser.add_argument("--yscale", default="linear")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    fmt = args.format
    if fmt is None:
        fmt = "svg" if args.out.endswith(".svg") else "png"
    try:
        spec = FigureSpec(
            kind=args.kind,
            csv_paths=tuple(args.csv),
            out_path=args.out,
            summary_path=args.summary,
            fmt=fmt,
            xscale=args.xscale,
            yscale=args.yscale,
            degree=args.degree,
        )
        out = render(spec)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
