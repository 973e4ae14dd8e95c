"""Long structured captions: typed model, strict parsing, canonical bytes.

The schema is a closed contract: every document carries exactly the known
keys, lists hold at most five entries, and the canonical serialization
fixes key order, two-space indentation, and explicit nulls so that equal
captions always produce identical bytes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, fields as dc_fields
from typing import Any, Optional

MAX_LIST_ENTRIES = 5


class CaptionSyntaxError(ValueError):
    """The input is not well-formed JSON."""


class SchemaError(ValueError):
    """The document violates the caption schema at ``path``."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.rule = message


class InvalidCaption(ValueError):
    """A structurally invalid caption was passed where a valid one is required."""


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str

    def __str__(self):
        return f"{self.path}: {self.rule}"


@dataclass(frozen=True)
class ObjectEntry:
    description: str
    location: str
    relationship: str
    relative_size: str
    shape_and_color: str
    texture: Optional[str] = None
    appearance_details: Optional[str] = None
    number_of_objects: Optional[int] = None
    pose: Optional[str] = None
    expression: Optional[str] = None
    clothing: Optional[str] = None
    action: Optional[str] = None
    gender: Optional[str] = None
    skin_tone_and_texture: Optional[str] = None
    orientation: Optional[str] = None


@dataclass(frozen=True)
class Lighting:
    conditions: str
    direction: str
    shadows: Optional[str] = None


@dataclass(frozen=True)
class Aesthetics:
    composition: str
    color_scheme: str
    mood_atmosphere: str


@dataclass(frozen=True)
class PhotoChar:
    depth_of_field: str
    focus: str
    camera_angle: str
    lens_focal_length: str


@dataclass(frozen=True)
class TextRenderEntry:
    text: str
    location: str
    size: str
    color: str
    font: str
    appearance_details: Optional[str] = None


@dataclass(frozen=True)
class StructuredCaption:
    short_description: str
    objects: tuple[ObjectEntry, ...]
    background_setting: str
    lighting: Lighting
    aesthetics: Aesthetics
    photographic_characteristics: Optional[PhotoChar]
    style_medium: str
    text_render: tuple[TextRenderEntry, ...]
    context: str
    artistic_style: str


# Declarative field tables drive parsing, validation, canonical order and
# path resolution from one place. Entries: (name, kind, required).
# Kinds: "str", "posint", ("obj", cls, nullable), ("list", cls).
_OBJECT_FIELDS = [
    ("description", "str", True),
    ("location", "str", True),
    ("relationship", "str", True),
    ("relative_size", "str", True),
    ("shape_and_color", "str", True),
    ("texture", "str", False),
    ("appearance_details", "str", False),
    ("number_of_objects", "posint", False),
    ("pose", "str", False),
    ("expression", "str", False),
    ("clothing", "str", False),
    ("action", "str", False),
    ("gender", "str", False),
    ("skin_tone_and_texture", "str", False),
    ("orientation", "str", False),
]
_LIGHTING_FIELDS = [
    ("conditions", "str", True),
    ("direction", "str", True),
    ("shadows", "str", False),
]
_AESTHETICS_FIELDS = [
    ("composition", "str", True),
    ("color_scheme", "str", True),
    ("mood_atmosphere", "str", True),
]
_PHOTO_FIELDS = [
    ("depth_of_field", "str", True),
    ("focus", "str", True),
    ("camera_angle", "str", True),
    ("lens_focal_length", "str", True),
]
_TEXT_RENDER_FIELDS = [
    ("text", "str", True),
    ("location", "str", True),
    ("size", "str", True),
    ("color", "str", True),
    ("font", "str", True),
    ("appearance_details", "str", False),
]

FLAT_FIELDS = {
    ObjectEntry: _OBJECT_FIELDS,
    Lighting: _LIGHTING_FIELDS,
    Aesthetics: _AESTHETICS_FIELDS,
    PhotoChar: _PHOTO_FIELDS,
    TextRenderEntry: _TEXT_RENDER_FIELDS,
}

TOP_FIELDS = [
    ("short_description", "str", True),
    ("objects", ("list", ObjectEntry), True),
    ("background_setting", "str", True),
    ("lighting", ("obj", Lighting, False), True),
    ("aesthetics", ("obj", Aesthetics, False), True),
    ("photographic_characteristics", ("obj", PhotoChar, True), True),
    ("style_medium", "str", True),
    ("text_render", ("list", TextRenderEntry), True),
    ("context", "str", True),
    ("artistic_style", "str", True),
]


def _build_flat(cls, raw, path: str):
    if not isinstance(raw, dict):
        raise SchemaError(path, f"expected an object, got {type(raw).__name__}")
    table = FLAT_FIELDS[cls]
    known = {name for name, _, _ in table}
    for key in raw:
        if key not in known:
            raise SchemaError(f"{path}.{key}", "unknown field")
    kwargs = {}
    for name, kind, required in table:
        sub = f"{path}.{name}"
        value = raw.get(name)
        if value is None:
            if required and kind == "str":
                raise SchemaError(sub, "required field missing or null")
            kwargs[name] = None
            continue
        if kind == "str":
            if not isinstance(value, str):
                raise SchemaError(sub, f"expected a string, got {type(value).__name__}")
        elif kind == "posint":
            if not isinstance(value, int) or isinstance(value, bool):
                raise SchemaError(sub, f"expected an integer, got {type(value).__name__}")
            if value < 1:
                raise SchemaError(sub, "must be a positive integer")
        kwargs[name] = value
    return cls(**kwargs)


def _build_list(cls, raw, path: str):
    if not isinstance(raw, list):
        raise SchemaError(path, f"expected a list, got {type(raw).__name__}")
    if len(raw) > MAX_LIST_ENTRIES:
        raise SchemaError(path, f"at most {MAX_LIST_ENTRIES} entries allowed, got {len(raw)}")
    return tuple(_build_flat(cls, item, f"{path}[{i}]") for i, item in enumerate(raw))


def build_caption(tree: Any, path: str = "$") -> StructuredCaption:
    """Strictly convert a parsed JSON tree into a typed caption."""
    if not isinstance(tree, dict):
        raise SchemaError(path, f"expected a top-level object, got {type(tree).__name__}")
    known = {name for name, _, _ in TOP_FIELDS}
    for key in tree:
        if key not in known:
            raise SchemaError(f"{path}.{key}", "unknown field")
    kwargs = {}
    for name, kind, _required in TOP_FIELDS:
        sub = f"{path}.{name}"
        if name not in tree:
            raise SchemaError(sub, "required field missing")
        value = tree[name]
        if kind == "str":
            if not isinstance(value, str):
                raise SchemaError(sub, f"expected a string, got {type(value).__name__}")
            kwargs[name] = value
        elif kind[0] == "list":
            kwargs[name] = _build_list(kind[1], value, sub)
        else:
            _, cls, nullable = kind
            if value is None:
                if not nullable:
                    raise SchemaError(sub, "required field missing or null")
                kwargs[name] = None
            else:
                kwargs[name] = _build_flat(cls, value, sub)
    return StructuredCaption(**kwargs)


def parse_caption(data: bytes | str) -> StructuredCaption:
    """Parse and strictly validate a UTF-8 caption document."""
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CaptionSyntaxError(f"not valid UTF-8: {exc}") from exc
    try:
        tree = json.loads(data)
    except json.JSONDecodeError as exc:
        raise CaptionSyntaxError(f"malformed JSON: {exc}") from exc
    return build_caption(tree)


def _validate_flat(instance, cls, path: str, out: list[Violation]):
    if not isinstance(instance, cls):
        out.append(Violation(path, f"expected {cls.__name__}"))
        return
    for name, kind, required in FLAT_FIELDS[cls]:
        value = getattr(instance, name)
        sub = f"{path}.{name}"
        if value is None:
            if required:
                out.append(Violation(sub, "required field missing"))
            continue
        if kind == "str" and not isinstance(value, str):
            out.append(Violation(sub, "expected a string"))
        elif kind == "posint":
            if not isinstance(value, int) or isinstance(value, bool):
                out.append(Violation(sub, "expected an integer"))
            elif value < 1:
                out.append(Violation(sub, "must be a positive integer"))


def validate(c: StructuredCaption) -> list[Violation]:
    """All schema violations in ``c``; empty when the caption is valid.

    Works on raw-constructed instances, so every invariant is re-checked
    rather than trusted from parse time.
    """
    out: list[Violation] = []
    for name, kind, _required in TOP_FIELDS:
        value = getattr(c, name, None)
        path = f"$.{name}"
        if kind == "str":
            if not isinstance(value, str):
                out.append(Violation(path, "required field missing"))
        elif kind[0] == "list":
            if not isinstance(value, (list, tuple)):
                out.append(Violation(path, "expected a list"))
                continue
            if len(value) > MAX_LIST_ENTRIES:
                out.append(
                    Violation(path, f"at most {MAX_LIST_ENTRIES} entries allowed")
                )
            for i, item in enumerate(value):
                _validate_flat(item, kind[1], f"{path}[{i}]", out)
        else:
            _, cls, nullable = kind
            if value is None:
                if not nullable:
                    out.append(Violation(path, "required field missing"))
            else:
                _validate_flat(value, cls, path, out)
    return out


def _tree_flat(instance, cls) -> dict:
    return {name: getattr(instance, name) for name, _, _ in FLAT_FIELDS[cls]}


def to_tree(c: StructuredCaption) -> dict:
    """Plain JSON tree in canonical key order, explicit None for absences."""
    tree: dict[str, Any] = {}
    for name, kind, _ in TOP_FIELDS:
        value = getattr(c, name)
        if kind == "str":
            tree[name] = value
        elif kind[0] == "list":
            tree[name] = [_tree_flat(item, kind[1]) for item in value]
        else:
            tree[name] = None if value is None else _tree_flat(value, kind[1])
    return tree


def _emit(value, indent: int, lines: list[str], spans, path: str, suffix: str, key=None):
    pad = "  " * indent
    prefix = pad if key is None else f'{pad}"{key}": '
    start = len(lines)
    if isinstance(value, dict):
        lines.append(prefix + "{")
        items = list(value.items())
        for i, (k, v) in enumerate(items):
            _emit(v, indent + 1, lines, spans, f"{path}.{k}", "," if i < len(items) - 1 else "", key=k)
        lines.append(pad + "}" + suffix)
    elif isinstance(value, list):
        if not value:
            lines.append(prefix + "[]" + suffix)
        else:
            lines.append(prefix + "[")
            for i, item in enumerate(value):
                _emit(item, indent + 1, lines, spans, f"{path}[{i}]", "," if i < len(value) - 1 else "")
            lines.append(pad + "]" + suffix)
    else:
        rendered = "null" if value is None else json.dumps(value, ensure_ascii=False)
        lines.append(prefix + rendered + suffix)
    if spans is not None:
        spans[path] = (start, len(lines) - 1)


def canonicalize_with_spans(c: StructuredCaption):
    """Canonical bytes plus a map from field path to (first, last) line index."""
    violations = validate(c)
    if violations:
        raise InvalidCaption("; ".join(str(v) for v in violations))
    lines: list[str] = []
    spans: dict[str, tuple[int, int]] = {}
    _emit(to_tree(c), 0, lines, spans, "$", "")
    return ("\n".join(lines) + "\n").encode("utf-8"), spans


def canonicalize(c: StructuredCaption) -> bytes:
    """Deterministic UTF-8 serialization: fixed key order, explicit nulls."""
    data, _ = canonicalize_with_spans(c)
    return data


def flatten(c: StructuredCaption) -> str:
    """Deterministic text form consumed by tokenizers: the canonical document."""
    return canonicalize(c).decode("utf-8")
