"""Command-line tools for structured captions.

Exit codes: 0 on success, 2 on any schema violation or parse failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import edits as edits_mod
from .schema import (
    CaptionSyntaxError,
    InvalidCaption,
    SchemaError,
    canonicalize,
    parse_caption,
    validate,
)
from .stats import token_stats

SCHEMA_EXIT = 2


def _load(path: str):
    return parse_caption(Path(path).read_bytes())


def cmd_validate(args) -> int:
    try:
        caption = _load(args.file)
    except (CaptionSyntaxError, SchemaError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return SCHEMA_EXIT
    violations = validate(caption)
    if violations:
        for v in violations:
            print(f"violation: {v}", file=sys.stderr)
        return SCHEMA_EXIT
    print("ok")
    return 0


def cmd_canon(args) -> int:
    caption = _load(args.file)
    sys.stdout.buffer.write(canonicalize(caption))
    return 0


def cmd_diff(args) -> int:
    a, b = _load(args.a), _load(args.b)
    print(edits_mod.edits_to_json(edits_mod.diff(a, b)))
    return 0


def cmd_apply(args) -> int:
    caption = _load(args.file)
    edit_set = edits_mod.edits_from_json(Path(args.editset).read_text("utf-8"))
    result = edits_mod.apply_edit(caption, edit_set)
    sys.stdout.buffer.write(canonicalize(result))
    return 0


def cmd_stats(args) -> int:
    files = sorted(Path(args.dir).glob("*.json"))
    captions = [parse_caption(p.read_bytes()) for p in files]
    stats = token_stats(captions)
    print(
        json.dumps(
            {
                "captions": len(captions),
                "avg": round(stats.avg, 2),
                "median": stats.median,
                "std_dev": round(stats.std_dev, 2),
                "min": stats.min,
                "max": stats.max,
            }
        )
    )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="caption", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check one caption document")
    p.add_argument("file")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("canon", help="print the canonical serialization")
    p.add_argument("file")
    p.set_defaults(fn=cmd_canon)

    p = sub.add_parser("diff", help="emit the EditSet turning caption A into B")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(fn=cmd_diff)

    p = sub.add_parser("apply", help="apply an EditSet file to a caption")
    p.add_argument("file")
    p.add_argument("editset")
    p.set_defaults(fn=cmd_apply)

    p = sub.add_parser("stats", help="token statistics over a directory of captions")
    p.add_argument("dir")
    p.set_defaults(fn=cmd_stats)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CaptionSyntaxError, SchemaError, InvalidCaption, edits_mod.PathError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return SCHEMA_EXIT


if __name__ == "__main__":
    sys.exit(main())
