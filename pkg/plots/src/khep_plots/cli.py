"""khep-plot: render figures from khep CSV/JSON artifacts.

Usage: khep-plot <kind> <inputs...> -o out.svg [--domain-json d.json]
Exit codes: 0 success, 1 render/parse failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .artifacts import ArtifactError
from .render import KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="khep-plot")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("inputs", nargs="+",
                        help="trajectory/overlay CSV files (gallery takes many)")
    parser.add_argument("-o", "--output", required=True)
    parser.add_argument("--domain-json",
                        help="domain annotation for ztrace/overlay")
    parser.add_argument("--title")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(kind=args.kind,
                    inputs=tuple(args.inputs),
                    output=Path(args.output),
                    domain_json=Path(args.domain_json)
                    if args.domain_json else None,
                    title=args.title)
    try:
        out = render(spec)
    except (ArtifactError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
