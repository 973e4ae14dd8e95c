"""Structured caption schema, canonical serialization, edits, statistics."""

from .edits import (
    OP_DELETE,
    OP_INSERT,
    OP_REMOVE,
    OP_SET,
    EditOp,
    EditSet,
    PathError,
    apply_edit,
    diff,
    edits_from_json,
    edits_to_json,
    parse_path,
    render_path,
)
from .schema import (
    MAX_LIST_ENTRIES,
    Aesthetics,
    CaptionSyntaxError,
    InvalidCaption,
    Lighting,
    ObjectEntry,
    PhotoChar,
    SchemaError,
    StructuredCaption,
    TextRenderEntry,
    Violation,
    build_caption,
    canonicalize,
    canonicalize_with_spans,
    flatten,
    parse_caption,
    to_tree,
    validate,
)
from .stats import CorpusStats, EmptyCorpus, default_tokenizer, token_stats

__all__ = [
    "MAX_LIST_ENTRIES",
    "Aesthetics",
    "CaptionSyntaxError",
    "CorpusStats",
    "EditOp",
    "EditSet",
    "EmptyCorpus",
    "InvalidCaption",
    "Lighting",
    "ObjectEntry",
    "OP_DELETE",
    "OP_INSERT",
    "OP_REMOVE",
    "OP_SET",
    "PathError",
    "PhotoChar",
    "SchemaError",
    "StructuredCaption",
    "TextRenderEntry",
    "Violation",
    "apply_edit",
    "build_caption",
    "canonicalize",
    "canonicalize_with_spans",
    "default_tokenizer",
    "diff",
    "edits_from_json",
    "edits_to_json",
    "flatten",
    "parse_caption",
    "parse_path",
    "render_path",
    "to_tree",
    "token_stats",
    "validate",
]
