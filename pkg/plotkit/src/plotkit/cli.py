"""plotkit command line.

    plotkit render --run DIR --figure NAME --out FILE
    plotkit compare --a DIR --b DIR --out FILE

Exit 0 on success, 1 on any validation/compatibility error, 2 on I/O
failure.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional

from .figures import FIGURE_KINDS, CompareResult, FigureRequest, compare, render
from .io import RunDirError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render figures from simulator run directories"
    )
    sub = parser.add_subparsers(dest="command")

    p_render = sub.add_parser("render", help="render one figure from a run")
    p_render.add_argument("--run", required=True, help="run directory")
    p_render.add_argument("--figure", required=True, choices=FIGURE_KINDS)
    p_render.add_argument("--out", required=True, help="output image file")

    p_cmp = sub.add_parser("compare", help="overlay two runs' mean trajectories")
    p_cmp.add_argument("--a", required=True, help="first run directory")
    p_cmp.add_argument("--b", required=True, help="second run directory")
    p_cmp.add_argument("--out", required=True, help="output image file")
    return parser


def main(argv: Optional["list[str]"] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "render":
            out = render(FigureRequest(run_dir=args.run, figure=args.figure, out_file=args.out))
            print(f"wrote {out}")
        else:
            result: CompareResult = compare(args.a, args.b, args.out)
            print(f"wrote {result.out_file}")
            if result.overtake_iteration is not None:
                print(f"overtake iteration: {result.overtake_iteration}")
    except RunDirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
