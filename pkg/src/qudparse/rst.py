"""Constituency trees with nuclearity, and their dependency conversion.

Input is a bracketed span notation, one tree per expression::

    tree     := '(' span relation nuclearity tree* ')'
    span     := INT | INT '-' INT          (inclusive sentence indices)
    relation := TOKEN                      ('-' when unlabeled)
    nuclearity := 'N' | 'S'

Leaves are single sentences; children of a node partition its span in
order; every internal node has at least one Nucleus child.  Spans below
the sentence level cannot be expressed and multi-sentence leaves are
rejected: discourse-unit-to-sentence mapping is the caller's concern.

Conversion follows nuclearity head percolation: the head of a leaf is
itself, the head of an internal node is the head of its leftmost Nucleus
child, and each non-head sentence attaches to the head of the parent of
the highest node it heads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from qudparse.core import DepTree, QudParseError
from qudparse.ingest import _get, _iter_json_lines

NUCLEUS = "N"
SATELLITE = "S"


class RstError(QudParseError):
    """Malformed bracketed tree or nuclearity structure."""


@dataclass(frozen=True)
class RstNode:
    """One constituency node; ``nuclearity`` is its role under its parent
    (the root's role is ignored)."""

    start: int
    end: int
    nuclearity: str
    relation: "str | None"
    children: tuple[RstNode, ...] = ()

    def __post_init__(self) -> None:
        if self.nuclearity not in (NUCLEUS, SATELLITE):
            raise RstError(f"nuclearity must be N or S, got {self.nuclearity!r}")
        if self.start < 1 or self.end < self.start:
            raise RstError(f"bad span {self.start}-{self.end}")
        if not self.children:
            if self.start != self.end:
                raise RstError(
                    f"leaf spanning {self.start}-{self.end}: leaves must be "
                    "single sentences"
                )
            return
        cursor = self.start
        for child in self.children:
            if child.start != cursor:
                raise RstError(
                    f"children of {self.start}-{self.end} do not partition it "
                    f"in order (expected start {cursor}, got {child.start})"
                )
            cursor = child.end + 1
        if cursor != self.end + 1:
            raise RstError(
                f"children of {self.start}-{self.end} stop at {cursor - 1}"
            )
        if all(child.nuclearity != NUCLEUS for child in self.children):
            raise RstError(
                f"node {self.start}-{self.end} has no Nucleus child"
            )

    @property
    def is_leaf(self) -> bool:
        return not self.children


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_rst(text: str) -> RstNode:
    """Parse one bracketed tree expression."""
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise RstError("empty tree expression")
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise RstError("unexpected end of expression")
        token = tokens[pos]
        pos += 1
        return token

    def parse_node() -> RstNode:
        nonlocal pos
        if take() != "(":
            raise RstError("expected '('")
        span = take()
        match = re.fullmatch(r"(\d+)(?:-(\d+))?", span)
        if not match:
            raise RstError(f"bad span token {span!r}")
        start = int(match.group(1))
        end = int(match.group(2)) if match.group(2) else start
        relation = take()
        if relation in ("(", ")"):
            raise RstError("expected a relation token (use '-' when unlabeled)")
        nuclearity = take()
        children = []
        while True:
            if pos >= len(tokens):
                raise RstError("unbalanced parentheses")
            if tokens[pos] == ")":
                pos += 1
                break
            children.append(parse_node())
        return RstNode(
            start=start, end=end, nuclearity=nuclearity,
            relation=None if relation == "-" else relation,
            children=tuple(children),
        )

    node = parse_node()
    if pos != len(tokens):
        raise RstError(f"trailing tokens after tree: {tokens[pos:]}")
    return node


def format_rst(node: RstNode) -> str:
    span = str(node.start) if node.start == node.end else f"{node.start}-{node.end}"
    parts = [span, node.relation or "-", node.nuclearity]
    parts.extend(format_rst(child) for child in node.children)
    return "(" + " ".join(parts) + ")"


def head(node: RstNode) -> int:
    """Head sentence of a node: itself for leaves, otherwise the head of
    the leftmost Nucleus child."""
    if node.is_leaf:
        return node.start
    for child in node.children:
        if child.nuclearity == NUCLEUS:
            return head(child)
    raise RstError(f"node {node.start}-{node.end} has no Nucleus child")


def to_dep(tree: RstNode) -> DepTree:
    """Convert a constituency tree covering sentences 1..n into a
    dependency tree rooted at the head of the whole tree.

    Each sentence that heads some chain of nodes attaches to the head of
    the parent of the highest such node.
    """
    if tree.start != 1:
        raise RstError(f"tree must cover sentences starting at 1, got {tree.start}")
    n = tree.end
    parent_node: dict[int, RstNode] = {}
    order: list[RstNode] = []

    def walk(node: RstNode) -> None:
        order.append(node)
        for child in node.children:
            parent_node[id(child)] = node
            walk(child)

    walk(tree)
    heads = {id(node): head(node) for node in order}
    parents: dict[int, int] = {}
    root_sentence = heads[id(tree)]
    for node in order:
        if not node.is_leaf:
            continue
        sentence = node.start
        if sentence == root_sentence:
            continue
        highest = node
        while id(highest) in parent_node and heads[id(parent_node[id(highest)])] == sentence:
            highest = parent_node[id(highest)]
        parents[sentence] = heads[id(parent_node[id(highest)])]
    return DepTree.from_parent_map(n, parents, root=root_sentence)


def load_rst_records(path: "str | Path") -> Iterator[tuple[str, RstNode]]:
    """Load trees from a JSON Lines file of {article_id, tree} records."""
    for lineno, obj in _iter_json_lines(path):
        article_id = str(_get(obj, "article_id", str(path), lineno))
        expression = str(_get(obj, "tree", str(path), lineno))
        try:
            yield article_id, parse_rst(expression)
        except RstError as exc:
            raise RstError(f"[{path}, line {lineno}] {exc}") from exc
