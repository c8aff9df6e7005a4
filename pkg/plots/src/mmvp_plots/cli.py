"""CLI: render one figure id from harness CSV outputs."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureSpec, render
from .schema import SchemaError

USAGE_EXIT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmvp-plots",
                                     description="Render figures from experiment CSV files")
    commands = parser.add_subparsers(dest="command", required=True)
    p_render = commands.add_parser("render", help="render one figure")
    p_render.add_argument("--figure", required=True, choices=FIGURE_IDS)
    p_render.add_argument("--in", dest="inputs", required=True,
                          help="input CSV path(s), comma separated")
    p_render.add_argument("--out", required=True, help="output image path")
    p_render.add_argument("--title", help="figure title override")
    p_render.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    styling = {"dpi": args.dpi}
    if args.title:
        styling["title"] = args.title
    spec = FigureSpec(
        figure_id=args.figure,
        inputs=[p.strip() for p in args.inputs.split(",") if p.strip()],
        output_path=args.out,
        styling=styling,
    )
    try:
        data = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    print(f"wrote {args.out} ({len(data.lines)} line(s))")
    return 0


if __name__ == "__main__":
    sys.exit(main())
