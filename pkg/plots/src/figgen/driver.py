"""Regenerate every figure from a results directory of sweep CSVs.

Files are grouped by the experiment kind found in their rows; files whose
stem ends in ``_hi`` join the same figure as impaired-hardware series.
One image per experiment kind.
"""

from __future__ import annotations

import argparse
import os
import sys
from collections import defaultdict

from .figures import FigureSpec, render
from .records import SchemaError, kind_of, read_rows


def _suffix_for(stem: str) -> str:
    return " HI" if stem.endswith("_hi") or "_hi_" in stem else ""


def collect_figures(results_dir: str, out_dir: str,
                    error_bars: bool = False) -> list[FigureSpec]:
    groups: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for name in sorted(os.listdir(results_dir)):
        if not name.endswith(".csv"):
            continue
        path = os.path.join(results_dir, name)
        rows = read_rows(path)
        if not rows:
            continue
        stem = os.path.splitext(name)[0]
        groups[kind_of(rows, path)].append((path, _suffix_for(stem)))
    return [FigureSpec(inputs=tuple(paths), kind=kind,
                       output=os.path.join(out_dir, f"{kind}.png"),
                       error_bars=error_bars)
            for kind, paths in sorted(groups.items())]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figgen", description="Render figures from sweep CSVs")
    parser.add_argument("results_dir", help="directory of sweep CSV files")
    parser.add_argument("out_dir", nargs="?", default=None,
                        help="output directory (default: results_dir)")
    parser.add_argument("--error-bars", action="store_true")
    args = parser.parse_args(argv)
    out_dir = args.out_dir or args.results_dir
    os.makedirs(out_dir, exist_ok=True)
    try:
        specs = collect_figures(args.results_dir, out_dir, args.error_bars)
        for spec in specs:
            print(f"{spec.kind}: {render(spec)}")
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    if not specs:
        print("no sweep CSVs found", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
