"""Structural edits over captions: path grammar, diff, and apply.

Edits operate on the canonical JSON tree. An EditSet replays sequentially,
each path resolved against the partially edited document, so list
insertions and removals compose naturally.
"""
from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass
from typing import Any, Optional

from .schema import StructuredCaption, build_caption, to_tree

OP_SET = "set"
OP_DELETE = "delete"
OP_INSERT = "insert-list-item"
OP_REMOVE = "remove-list-item"


class PathError(ValueError):
    """A field path does not resolve in the document."""


@dataclass(frozen=True)
class EditOp:
    path: str
    op: str
    value: Optional[Any] = None

    def to_json(self) -> dict:
        return {"path": self.path, "op": self.op, "value": self.value}


EditSet = list  # ordered list of EditOp


_SEGMENT = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)((?:\[\d+\])*)")


def parse_path(path: str) -> list:
    """'$.objects[2].pose' -> ['objects', 2, 'pose']."""
    s = path.strip()
    if s.startswith("$"):
        s = s[1:]
    s = s.lstrip(".")
    if not s:
        raise PathError(f"empty path: {path!r}")
    segments: list = []
    pos = 0
    while pos < len(s):
        m = _SEGMENT.match(s, pos)
        if not m:
            raise PathError(f"bad path syntax at {s[pos:]!r} in {path!r}")
        segments.append(m.group(1))
        for idx in re.findall(r"\[(\d+)\]", m.group(2)):
            segments.append(int(idx))
        pos = m.end()
        if pos < len(s):
            if s[pos] != ".":
                raise PathError(f"bad path syntax at {s[pos:]!r} in {path!r}")
            pos += 1
    return segments


def render_path(segments) -> str:
    out = "$"
    for seg in segments:
        out += f"[{seg}]" if isinstance(seg, int) else f".{seg}"
    return out


def _resolve_parent(tree, segments, path):
    node = tree
    for seg in segments[:-1]:
        if isinstance(seg, int):
            if not isinstance(node, list) or seg >= len(node):
                raise PathError(f"cannot resolve {path!r}")
            node = node[seg]
        else:
            if not isinstance(node, dict) or seg not in node:
                raise PathError(f"cannot resolve {path!r}")
            node = node[seg]
    return node


def _diff_scalar(a, b, path, ops):
    if a != b:
        ops.append(EditOp(render_path(path), OP_SET, b))


def _diff_dict(a: dict, b: dict, path, ops):
    for key in a:
        va, vb = a[key], b[key]
        if va == vb:
            continue
        sub = path + [key]
        if isinstance(va, dict) and isinstance(vb, dict):
            _diff_dict(va, vb, sub, ops)
        elif isinstance(va, list) and isinstance(vb, list):
            _diff_list(va, vb, sub, ops)
        elif vb is None:
            ops.append(EditOp(render_path(sub), OP_DELETE))
        else:
            ops.append(EditOp(render_path(sub), OP_SET, copy.deepcopy(vb)))


def _entry_diff_cost(a, b) -> int:
    probe: list = []
    _diff_dict(a, b, [], probe)
    return len(probe)


def _diff_list(a: list, b: list, path, ops):
    """Minimal edit script between two short lists (insert/remove cost 1,
    substitution cost = number of field-level edits)."""
    n, m = len(a), len(b)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    move = [[None] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
        move[i][0] = "del"
    for j in range(1, m + 1):
        cost[0][j] = j
        move[0][j] = "ins"
    sub_cost = {}
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            s = _entry_diff_cost(a[i - 1], b[j - 1])
            sub_cost[(i, j)] = s
            best, how = cost[i - 1][j - 1] + s, "sub"
            if cost[i - 1][j] + 1 < best:
                best, how = cost[i - 1][j] + 1, "del"
            if cost[i][j - 1] + 1 < best:
                best, how = cost[i][j - 1] + 1, "ins"
            cost[i][j] = best
            move[i][j] = how
    script = []
    i, j = n, m
    while i > 0 or j > 0:
        how = move[i][j]
        if how == "sub":
            script.append(("sub", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif how == "del":
            script.append(("del", i - 1, None))
            i -= 1
        else:
            script.append(("ins", None, j - 1))
            j -= 1
    script.reverse()

    live = 0
    for how, ai, bj in script:
        if how == "sub":
            if sub_cost[(ai + 1, bj + 1)]:
                _diff_dict(a[ai], b[bj], path + [live], ops)
            live += 1
        elif how == "del":
            ops.append(EditOp(render_path(path + [live]), OP_REMOVE))
        else:
            ops.append(
                EditOp(render_path(path + [live]), OP_INSERT, copy.deepcopy(b[bj]))
            )
            live += 1


def diff(a: StructuredCaption, b: StructuredCaption) -> EditSet:
    """EditSet e with apply_edit(a, e) canonically equal to b; empty when a == b."""
    ops: EditSet = []
    _diff_dict(to_tree(a), to_tree(b), [], ops)
    return ops


def apply_edit(c: StructuredCaption, edits: EditSet) -> StructuredCaption:
    """Replay ``edits`` over ``c``; untouched fields keep their canonical bytes."""
    tree = copy.deepcopy(to_tree(c))
    for op in edits:
        segments = parse_path(op.path)
        parent = _resolve_parent(tree, segments, op.path)
        last = segments[-1]
        if op.op == OP_SET:
            if isinstance(last, int):
                if not isinstance(parent, list) or last >= len(parent):
                    raise PathError(f"cannot resolve {op.path!r}")
                parent[last] = copy.deepcopy(op.value)
            else:
                if not isinstance(parent, dict) or last not in parent:
                    raise PathError(f"cannot resolve {op.path!r}")
                parent[last] = copy.deepcopy(op.value)
        elif op.op == OP_DELETE:
            if isinstance(last, int) or not isinstance(parent, dict) or last not in parent:
                raise PathError(f"cannot resolve {op.path!r}")
            parent[last] = None
        elif op.op == OP_INSERT:
            if not isinstance(last, int) or not isinstance(parent, list):
                raise PathError(f"insert-list-item path must index a list: {op.path!r}")
            if last > len(parent):
                raise PathError(f"insert index out of range: {op.path!r}")
            # Arity is enforced once, on the rebuilt document, so scripts may
            # pass through transient over-length states while replaying.
            parent.insert(last, copy.deepcopy(op.value))
        elif op.op == OP_REMOVE:
            if not isinstance(last, int) or not isinstance(parent, list):
                raise PathError(f"remove-list-item path must index a list: {op.path!r}")
            if last >= len(parent):
                raise PathError(f"remove index out of range: {op.path!r}")
            del parent[last]
        else:
            raise PathError(f"unknown edit op {op.op!r}")
    return build_caption(tree)


def edits_to_json(edits: EditSet) -> str:
    return json.dumps([op.to_json() for op in edits], indent=2, ensure_ascii=False)


def edits_from_json(data: str) -> EditSet:
    raw = json.loads(data)
    if not isinstance(raw, list):
        raise PathError("an EditSet document must be a JSON array")
    out: EditSet = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict) or "path" not in item or "op" not in item:
            raise PathError(f"edit #{i} must be an object with 'path' and 'op'")
        out.append(EditOp(item["path"], item["op"], item.get("value")))
    return out
