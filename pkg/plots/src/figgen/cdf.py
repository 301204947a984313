"""Render a cdf figure from one or more sweep CSVs."""

import argparse
import sys

from .figures import FigureSpec, render
from .records import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("csv", nargs="+", help="input sweep CSV file(s)")
    parser.add_argument("--out", default="cdf.png")
    parser.add_argument("--error-bars", action="store_true")
    args = parser.parse_args(argv)
    inputs = tuple((p, " HI" if p.rstrip(".csv").endswith("_hi") else "")
                   for p in args.csv)
    try:
        render(FigureSpec(inputs=inputs, kind="cdf", output=args.out,
                          error_bars=args.error_bars))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
