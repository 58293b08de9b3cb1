"""Figure rendering CLI: ``figures <kind> --in <csv> --out <png>``.

Kinds: loglog-converge, loglog-cond, shift-flat, energy,
cutcell-scatter, plus ``make-all`` to sweep a results directory.
Exits nonzero with a one-line diagnostic on malformed input.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import cutcell_scatter, energy, loglog_cond, loglog_converge, shift_flat
from .common import ALLOWED_GUIDES, FigureSpec
from .make_all import render_all

RENDERERS = {
    "loglog-converge": loglog_converge.render,
    "loglog-cond": loglog_cond.render,
    "shift-flat": shift_flat.render,
    "energy": energy.render,
    "cutcell-scatter": cutcell_scatter.render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures", description="Render figures from fdfsi study CSV files."
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in RENDERERS:
        p = sub.add_parser(kind, help=f"render a {kind} figure")
        p.add_argument("--in", dest="csv", type=Path, required=True, help="input CSV")
        p.add_argument("--out", type=Path, required=True, help="output image path")
        p.add_argument(
            "--guide", type=float, action="append", default=None,
            help=f"reference slope guide, one of {ALLOWED_GUIDES} (repeatable)",
        )
        p.add_argument("--title", default="")
    p = sub.add_parser("make-all", help="render every recognized CSV in a directory")
    p.add_argument("--in", dest="csv", type=Path, required=True, help="results directory")
    p.add_argument("--out", type=Path, required=True, help="image output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "make-all":
            written = render_all(args.csv, args.out)
            if not written:
                raise ValueError(f"no recognized CSV files in {args.csv}")
        else:
            spec = FigureSpec(
                args.kind,
                (args.csv,),
                args.out,
                guides=tuple(args.guide) if args.guide else (),
                title=args.title,
            )
            written = [RENDERERS[args.kind](spec)]
        for path in written:
            print(path)
        return 0
    except Exception as exc:
        print(f"figures: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
