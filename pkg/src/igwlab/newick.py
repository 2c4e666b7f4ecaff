"""Newick and JSON serialization for unlabeled metric trees.

Trees here carry no labels, only branch lengths, so the Newick dialect is
bare: ``(:2);`` is the single edge of length 2 (the outermost parentheses
hold the root's children), ``((:1,:3):1);`` is a cherry with stem 1 and leaf
edges 1 and 3, and ``;`` alone is the empty tree.  Output uses canonical
sibling order and ``repr`` floats, so writing preserves every bit of the
lengths and round-tripping is the identity up to sibling order.

The JSON form mirrors the same structure: the root object has a ``children``
list; every other node is ``{"len": <number>, "children": [...]}``.
"""

from __future__ import annotations

import json

import numpy as np

from .trees import MetricTree

__all__ = ["to_newick", "from_newick", "NewickError", "to_json", "from_json"]


class NewickError(ValueError):
    """Malformed Newick input; ``pos`` is the offending character index."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


# --------------------------------------------------------------------- #
# Writing                                                                 #
# --------------------------------------------------------------------- #


def to_newick(t: MetricTree) -> str:
    if t.is_empty:
        return ";"
    order, starts = t.children_table()

    def render(v: int) -> tuple[bytes, tuple, str]:
        kids = order[starts[v]: starts[v + 1]]
        sub = sorted((render(int(c)) for c in kids), key=lambda r: (len(r[0]), r[0], r[1]))
        code = b"(" + b"".join(c for c, _, _ in sub) + b")"
        own = (float(t.length[v]),) if v else ()
        lens = own + tuple(x for _, ls, _ in sub for x in ls)
        body = ",".join(s for _, _, s in sub)
        if kids.shape[0]:
            text = f"({body})"
        else:
            text = ""
        if v:
            text += f":{float(t.length[v])!r}"
        return code, lens, text

    _, _, inner = render(0)
    return inner + ";"


def to_json(t: MetricTree) -> str:
    order, starts = t.children_table()

    def node(v: int) -> dict:
        kids = [node(int(c)) for c in order[starts[v]: starts[v + 1]]]
        if v == 0:
            return {"children": kids}
        return {"len": float(t.length[v]), "children": kids}

    return json.dumps(node(0))


# --------------------------------------------------------------------- #
# Parsing                                                                 #
# --------------------------------------------------------------------- #


def from_newick(text: str) -> MetricTree:
    s = text.strip()
    if not s:
        raise NewickError("empty input", 0)
    if not s.endswith(";"):
        raise NewickError("missing terminating ';'", len(text) - 1)
    body = s[:-1].strip()
    parents: list[int] = [-1]
    lengths: list[float] = [0.0]
    if body:
        pos = _parse_children(body, 0, 0, parents, lengths)
        if pos != len(body):
            raise NewickError("trailing characters after tree", pos)
    return MetricTree(np.array(parents, dtype=np.int32), np.array(lengths))


def _parse_children(s: str, pos: int, parent: int, parents, lengths) -> int:
    """Parse '(' node, ... ')' attaching nodes to ``parent``."""
    if pos >= len(s) or s[pos] != "(":
        raise NewickError("expected '('", pos)
    pos += 1
    while True:
        pos = _parse_node(s, pos, parent, parents, lengths)
        if pos < len(s) and s[pos] == ",":
            pos += 1
            continue
        break
    if pos >= len(s) or s[pos] != ")":
        raise NewickError("expected ')' or ','", pos)
    return pos + 1


def _parse_node(s: str, pos: int, parent: int, parents, lengths) -> int:
    me = len(parents)
    parents.append(parent)
    lengths.append(np.nan)
    if pos < len(s) and s[pos] == "(":
        pos = _parse_children(s, pos, me, parents, lengths)
    if pos >= len(s) or s[pos] != ":":
        raise NewickError("expected ':<branch length>'", pos)
    pos += 1
    start = pos
    while pos < len(s) and (s[pos].isdigit() or s[pos] in ".eE+-"):
        # '-' only valid inside an exponent; cheap check below
        if s[pos] in "+-" and pos > start and s[pos - 1] not in "eE":
            break
        pos += 1
    try:
        val = float(s[start:pos])
    except ValueError:
        raise NewickError("invalid branch length", start) from None
    lengths[me] = val
    return pos


def from_json(text: str) -> MetricTree:
    obj = json.loads(text)
    parents: list[int] = [-1]
    lengths: list[float] = [0.0]

    def walk(node: dict, parent: int):
        if parent >= 0:
            me = len(parents)
            parents.append(parent)
            lengths.append(float(node["len"]))
        else:
            me = 0
        for child in node.get("children", []):
            walk(child, me)

    walk(obj, -1)
    return MetricTree(np.array(parents, dtype=np.int32), np.array(lengths))
