"""Command line: fogbandit-plot --kind regret --bundle DIR [--bundle DIR2] --out fig.png"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURE_KINDS, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogbandit-plot",
                                     description="Render figures from run bundles")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--bundle", action="append", required=True,
                        help="bundle directory (repeatable for multi-curve figures)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(tuple(Path(b) for b in args.bundle), args.kind, Path(args.out),
                      title=args.title)
    try:
        render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
