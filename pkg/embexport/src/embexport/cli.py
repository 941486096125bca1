"""Command-line interface: export a CSV of entities to an EMBV vector file.

Exit codes: 0 success, 1 usage or configuration problems, 2 data, model,
or filesystem failures.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .errors import ExportConfigError, ExportDataError
from .export import ExportJob, export_vectors


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="embexport", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    exp = sub.add_parser("export", help="embed a CSV and write an EMBV vector file")
    exp.add_argument("--input", required=True, help="entity CSV with a header row")
    exp.add_argument("--id-column", default="id", dest="id_column")
    exp.add_argument(
        "--model",
        required=True,
        help="provider id: hash:<dim> for the offline provider, else a sentence model name",
    )
    exp.add_argument("--batch", type=int, default=32)
    exp.add_argument("--output", required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        code = err.code
        if code is None:
            return 0
        return code if isinstance(code, int) else 1
    try:
        job = ExportJob(
            input_path=Path(args.input),
            id_column=args.id_column,
            model=args.model,
            batch_size=args.batch,
            output_path=Path(args.output),
        )
        count = export_vectors(job)
    except ExportConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ExportDataError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {count} vectors to {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
