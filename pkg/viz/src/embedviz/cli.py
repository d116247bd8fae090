"""Command line front end.

    embedviz table.tsv --out-dir plots --seed 0

reads an embedding table, projects it to 2-D, and writes one scatter image
per panel. Written paths go to stdout, logs to stderr. Exit codes: 0 on
success, 1 for usage errors, 2 for data errors.
"""

from __future__ import annotations

import argparse
import sys

from .plots import GROUPINGS, render_scatter
from .project import project_2d
from .table import TableError, load_table

__all__ = ["build_parser", "main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def build_parser() -> _Parser:
    parser = _Parser(prog="embedviz",
                     description="t-SNE scatter plots of an embedding table")
    parser.add_argument("table", help="embedding TSV exported by the lab")
    parser.add_argument("--group-by", choices=GROUPINGS, default="model_tag",
                        help="column that colors the points (default "
                             "model_tag); panels split by the other column")
    parser.add_argument("--perplexity", type=float, default=10.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(str(e), file=sys.stderr)
        return 1
    try:
        table = load_table(args.table)
        print(f"loaded {len(table)} rows of dim {table.dim} "
              f"from {args.table}", file=sys.stderr)
        points = project_2d(table, perplexity=args.perplexity, seed=args.seed)
        paths = render_scatter(table, points, group_by=args.group_by,
                               out_dir=args.out_dir, fmt=args.format)
    except (TableError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
