"""Documents, question-labeled trees, and their validity rules.

Sentence indices are 1-based everywhere; index 0 is reserved to mean
"no anchor" (the root).  All types are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_WHITESPACE_RUN = re.compile(r"\s+")


class QudParseError(Exception):
    """Base class for errors raised by this package."""


class InvalidTreeError(QudParseError):
    """A tree failed validation; carries the offending report."""

    def __init__(self, report: ValidationReport):
        self.report = report
        lines = "; ".join(v.message for v in report.violations)
        super().__init__(f"invalid tree: {lines}")


def normalize_text(raw: str) -> str:
    """Canonical sentence text: trimmed, internal whitespace runs collapsed
    to single spaces, case and punctuation preserved."""
    return _WHITESPACE_RUN.sub(" ", raw.strip())


@dataclass(frozen=True)
class Sentence:
    """One sentence of a document, pre-segmented by the ingestion layer."""

    index: int
    text: str
    tokens: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError(f"sentence index must be >= 1, got {self.index}")
        if not self.text:
            raise ValueError(f"sentence {self.index} has empty text")
        if " ".join(self.tokens) != self.text:
            raise ValueError(
                f"sentence {self.index}: tokens do not reproduce the canonical text"
            )

    @classmethod
    def from_text(cls, index: int, raw: str) -> Sentence:
        """Build a sentence from raw text, normalizing whitespace."""
        text = normalize_text(raw)
        if not text:
            raise ValueError(f"sentence {index} is empty after trimming")
        return cls(index=index, text=text, tokens=tuple(text.split(" ")))


@dataclass(frozen=True)
class Document:
    """An ordered article; the universe every sentence index refers to.

    Sentences are never re-segmented here: segmentation differences would
    silently shift every index downstream.
    """

    article_id: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ValueError(f"document {self.article_id!r} has no sentences")
        for pos, sent in enumerate(self.sentences, start=1):
            if sent.index != pos:
                raise ValueError(
                    f"document {self.article_id!r}: sentence indices must be "
                    f"contiguous 1..n, found {sent.index} at position {pos}"
                )

    @classmethod
    def from_texts(cls, article_id: str, texts: "list[str] | tuple[str, ...]") -> Document:
        return cls(
            article_id=article_id,
            sentences=tuple(
                Sentence.from_text(i, raw) for i, raw in enumerate(texts, start=1)
            ),
        )

    @property
    def n(self) -> int:
        return len(self.sentences)

    def sentence(self, index: int) -> Sentence:
        if not 1 <= index <= self.n:
            raise IndexError(f"sentence index {index} outside 1..{self.n}")
        return self.sentences[index - 1]


@dataclass(frozen=True)
class QudEntry:
    """One (answer sentence, anchor sentence, question) edge."""

    answer_index: int
    anchor_index: int
    question: str


@dataclass(frozen=True)
class QudTree:
    """Per-sentence (anchor, question) pairs over an article.

    Sentence 1 is always the root and has no entry.  Construction is
    permissive so that malformed or partial trees can be represented and
    then inspected: validity is checked by :func:`validate_tree`, which
    reports violations as data rather than raising.
    """

    article_id: str
    n: int
    entries: tuple[QudEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "entries", tuple(sorted(self.entries, key=lambda e: e.answer_index))
        )

    @classmethod
    def from_mapping(
        cls, article_id: str, n: int, edges: "dict[int, tuple[int, str]]"
    ) -> QudTree:
        """Build from {answer_index: (anchor_index, question)}."""
        return cls(
            article_id=article_id,
            n=n,
            entries=tuple(
                QudEntry(answer_index=i, anchor_index=a, question=q)
                for i, (a, q) in edges.items()
            ),
        )

    def entry_for(self, answer_index: int) -> "QudEntry | None":
        for entry in self.entries:
            if entry.answer_index == answer_index:
                return entry
        return None

    @property
    def is_complete(self) -> bool:
        """True when every sentence 2..n has exactly one entry."""
        return [e.answer_index for e in self.entries] == list(range(2, self.n + 1))


@dataclass(frozen=True)
class Violation:
    """One violated invariant, tied to the offending sentence index."""

    code: str
    index: "int | None"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_tree(tree: QudTree, doc: "Document | None" = None) -> ValidationReport:
    """Check every tree invariant; violations are data, not failures.

    Returns an empty report iff the tree is a complete, rooted dependency
    tree with anchors strictly preceding their answers and non-empty
    questions, and (when ``doc`` is given) sized to the document.
    """
    violations: list[Violation] = []
    if tree.n < 1:
        violations.append(Violation("size", None, f"n must be >= 1, got {tree.n}"))
        return ValidationReport(tuple(violations))
    if doc is not None and tree.n != doc.n:
        violations.append(
            Violation(
                "size-mismatch",
                None,
                f"tree has n={tree.n} but document has {doc.n} sentences",
            )
        )

    seen: set[int] = set()
    for entry in tree.entries:
        i = entry.answer_index
        if i in seen:
            violations.append(
                Violation("duplicate-entry", i, f"multiple entries for i={i}")
            )
            continue
        seen.add(i)
        if not 2 <= i <= tree.n:
            violations.append(
                Violation("entry-range", i, f"entry index {i} outside 2..{tree.n}")
            )
            continue
        if entry.anchor_index < 1:
            violations.append(
                Violation("anchor-range", i, f"anchor {entry.anchor_index} < 1 at i={i}")
            )
        elif entry.anchor_index >= i:
            violations.append(
                Violation(
                    "anchor-precedence", i, f"anchor not strictly earlier at i={i}"
                )
            )
        if not entry.question.strip():
            violations.append(Violation("empty-question", i, f"empty question at i={i}"))
    for i in range(2, tree.n + 1):
        if i not in seen:
            violations.append(Violation("missing-entry", i, f"missing entry for i={i}"))

    if not violations:
        # Guaranteed by anchor precedence over a complete entry set, but
        # assert reachability from the root anyway.
        parents = {e.answer_index: e.anchor_index for e in tree.entries}
        for i in range(2, tree.n + 1):
            node, hops = i, 0
            while node != 1 and hops <= tree.n:
                node = parents[node]
                hops += 1
            if node != 1:
                violations.append(
                    Violation("cycle", i, f"sentence {i} does not reach the root")
                )
                break
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class DepTree:
    """Bare dependency tree over sentences 1..n.

    ``parents[i - 1]`` is the parent of sentence ``i``; the root's slot
    holds 0.  Question-derived trees are always rooted at sentence 1;
    converted constituency trees may root elsewhere, so the root is
    stored explicitly.
    """

    n: int
    parents: tuple[int, ...]
    root: int = 1

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if len(self.parents) != self.n:
            raise ValueError(
                f"parents must have length n={self.n}, got {len(self.parents)}"
            )
        if not 1 <= self.root <= self.n:
            raise ValueError(f"root {self.root} outside 1..{self.n}")
        if self.parents[self.root - 1] != 0:
            raise ValueError(f"root {self.root} must have parent slot 0")
        for i in range(1, self.n + 1):
            p = self.parents[i - 1]
            if i == self.root:
                continue
            if not 1 <= p <= self.n or p == i:
                raise ValueError(f"parent of {i} is {p}, outside 1..{self.n}")
        for i in range(1, self.n + 1):
            node, hops = i, 0
            while node != self.root and hops <= self.n:
                node = self.parents[node - 1]
                hops += 1
            if node != self.root:
                raise ValueError(f"cycle: sentence {i} does not reach root {self.root}")

    @classmethod
    def from_parent_map(cls, n: int, parents: "dict[int, int]", root: int = 1) -> DepTree:
        """Build from {child: parent} over every non-root sentence."""
        slots = [0] * n
        for child, parent in parents.items():
            if not 1 <= child <= n:
                raise ValueError(f"child index {child} outside 1..{n}")
            slots[child - 1] = parent
        return cls(n=n, parents=tuple(slots), root=root)

    def parent_of(self, index: int) -> int:
        """Parent of ``index``, or 0 for the root."""
        if not 1 <= index <= self.n:
            raise IndexError(f"index {index} outside 1..{self.n}")
        return self.parents[index - 1]

    def children_map(self) -> "dict[int, list[int]]":
        children: dict[int, list[int]] = {i: [] for i in range(1, self.n + 1)}
        for i in range(1, self.n + 1):
            if i != self.root:
                children[self.parents[i - 1]].append(i)
        return children


def to_dep_tree(tree: QudTree) -> DepTree:
    """Project a valid question tree onto its bare dependency skeleton:
    the anchor sentence is the head of each edge.

    Raises :class:`InvalidTreeError` carrying the validation report when
    the tree is not valid.
    """
    report = validate_tree(tree)
    if not report.ok:
        raise InvalidTreeError(report)
    return DepTree.from_parent_map(
        tree.n, {e.answer_index: e.anchor_index for e in tree.entries}, root=1
    )
