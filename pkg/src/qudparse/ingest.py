"""Loading and serialization of articles, question annotations, and trees.

All interchange files are UTF-8 JSON Lines, one record per line:

* articles:   ``{"article_id": str, "sentences": [{"index": int, "text": str}]}``
* questions:  ``{"article_id": str, "worker_id": str, "answer_sentence_id": int,
  "anchor_sentence_id": int, "question_text": str}``
* trees:      either question-labeled records
  ``{"article_id": str, "n": int, "entries": [{"answer": int, "anchor": int,
  "question": str}]}`` or bare dependency records
  ``{"article_id": str, "n": int, "root": int, "parents": {str(child): parent}}``.

The question schema is this toolkit's own canonical layout; rows from other
release layouts can be mapped in with :func:`questions_from_rows`.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping

from qudparse.core import DepTree, Document, QudEntry, QudParseError, QudTree, Sentence

log = logging.getLogger(__name__)


class IngestError(QudParseError):
    """Malformed input record; names file, line, and field when known."""

    def __init__(self, message: str, *, path: "str | None" = None,
                 line: "int | None" = None, fieldname: "str | None" = None):
        self.path = path
        self.line = line
        self.fieldname = fieldname
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if fieldname is not None:
            where.append(f"field {fieldname!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class DcqaQuestion:
    """One crowdsourced question: an annotator picked an anchor sentence in
    prior context and wrote a question that a later sentence answers."""

    article_id: str
    worker_id: str
    answer_sentence_id: int
    anchor_sentence_id: int
    question_text: str

    def __post_init__(self) -> None:
        if self.answer_sentence_id < 2:
            raise ValueError(
                f"answer_sentence_id must be >= 2, got {self.answer_sentence_id}"
            )
        if self.anchor_sentence_id >= self.answer_sentence_id:
            raise ValueError(
                f"anchor {self.anchor_sentence_id} must precede answer "
                f"{self.answer_sentence_id}"
            )
        if self.anchor_sentence_id < 1:
            raise ValueError(f"anchor_sentence_id must be >= 1, got {self.anchor_sentence_id}")


@dataclass(frozen=True)
class AnnotatorTreeSet:
    """Per-annotator trees for one article; partial trees are first-class
    because workers may skip sentences."""

    article_id: str
    trees: Mapping[str, QudTree]
    missing: Mapping[str, frozenset[int]] = field(default_factory=dict)
    duplicates: tuple[DcqaQuestion, ...] = ()


def _iter_json_lines(path: "str | Path") -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise IngestError(f"not valid JSON: {exc}", path=str(path), line=lineno)
            if not isinstance(obj, dict):
                raise IngestError("record must be a JSON object", path=str(path), line=lineno)
            yield lineno, obj


def _get(obj: dict, key: str, path: str, line: int):
    if key not in obj:
        raise IngestError("missing field", path=path, line=line, fieldname=key)
    return obj[key]


def load_articles(path: "str | Path") -> list[Document]:
    """Load documents from an articles file.

    Sentence indices are taken as given and verified contiguous; an empty
    file yields an empty list.
    """
    documents: list[Document] = []
    seen_ids: dict[str, int] = {}
    for lineno, obj in _iter_json_lines(path):
        article_id = str(_get(obj, "article_id", str(path), lineno))
        if article_id in seen_ids:
            raise IngestError(
                f"duplicate article_id {article_id!r} (first seen on line "
                f"{seen_ids[article_id]})",
                path=str(path), line=lineno, fieldname="article_id",
            )
        seen_ids[article_id] = lineno
        rows = _get(obj, "sentences", str(path), lineno)
        if not isinstance(rows, list) or not rows:
            raise IngestError(
                "sentences must be a non-empty list",
                path=str(path), line=lineno, fieldname="sentences",
            )
        sentences = []
        for row in rows:
            if not isinstance(row, dict) or "index" not in row or "text" not in row:
                raise IngestError(
                    "each sentence needs index and text",
                    path=str(path), line=lineno, fieldname="sentences",
                )
            try:
                sentences.append(Sentence.from_text(int(row["index"]), str(row["text"])))
            except ValueError as exc:
                raise IngestError(str(exc), path=str(path), line=lineno, fieldname="text")
        try:
            documents.append(Document(article_id=article_id, sentences=tuple(sentences)))
        except ValueError as exc:
            raise IngestError(str(exc), path=str(path), line=lineno, fieldname="index")
    return documents


def save_articles(documents: Iterable[Document], handle: IO[str]) -> None:
    for doc in documents:
        record = {
            "article_id": doc.article_id,
            "sentences": [{"index": s.index, "text": s.text} for s in doc.sentences],
        }
        handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def questions_from_rows(
    rows: Iterable[Mapping], field_map: "Mapping[str, str] | None" = None
) -> Iterator[dict]:
    """Adapter hook: rename fields of foreign-layout rows into the canonical
    question schema.  ``field_map`` maps canonical name -> foreign name."""
    names = {
        "article_id": "article_id",
        "worker_id": "worker_id",
        "answer_sentence_id": "answer_sentence_id",
        "anchor_sentence_id": "anchor_sentence_id",
        "question_text": "question_text",
    }
    if field_map:
        names.update(field_map)
    for row in rows:
        yield {canonical: row[foreign] for canonical, foreign in names.items()}


def load_questions(
    path: "str | Path", documents: "Iterable[Document] | None" = None
) -> list[DcqaQuestion]:
    """Load question records, dropping invariant violations with a logged
    diagnostic.  Records for unknown articles are kept with a warning;
    records out of range for a known article are dropped.
    """
    doc_sizes = {d.article_id: d.n for d in documents} if documents is not None else {}
    warned_unknown: set[str] = set()
    questions: list[DcqaQuestion] = []
    for lineno, obj in _iter_json_lines(path):
        fields = {
            key: _get(obj, key, str(path), lineno)
            for key in (
                "article_id", "worker_id", "answer_sentence_id",
                "anchor_sentence_id", "question_text",
            )
        }
        try:
            record = DcqaQuestion(
                article_id=str(fields["article_id"]),
                worker_id=str(fields["worker_id"]),
                answer_sentence_id=int(fields["answer_sentence_id"]),
                anchor_sentence_id=int(fields["anchor_sentence_id"]),
                question_text=str(fields["question_text"]),
            )
        except (TypeError, ValueError) as exc:
            log.warning("%s line %d: rejected question record: %s", path, lineno, exc)
            continue
        if documents is not None:
            if record.article_id not in doc_sizes:
                if record.article_id not in warned_unknown:
                    log.warning(
                        "%s line %d: unknown article_id %r (record kept)",
                        path, lineno, record.article_id,
                    )
                    warned_unknown.add(record.article_id)
            elif record.answer_sentence_id > doc_sizes[record.article_id]:
                log.warning(
                    "%s line %d: rejected question record: answer %d beyond "
                    "article length %d",
                    path, lineno, record.answer_sentence_id,
                    doc_sizes[record.article_id],
                )
                continue
        questions.append(record)
    return questions


def save_questions(questions: Iterable[DcqaQuestion], handle: IO[str]) -> None:
    for q in questions:
        record = {
            "article_id": q.article_id,
            "worker_id": q.worker_id,
            "answer_sentence_id": q.answer_sentence_id,
            "anchor_sentence_id": q.anchor_sentence_id,
            "question_text": q.question_text,
        }
        handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def build_trees(questions: Iterable[DcqaQuestion], doc: Document) -> AnnotatorTreeSet:
    """Group one article's questions into per-annotator trees.

    When a worker gave several questions for one answer sentence, the first
    in file order wins and the rest are reported as duplicates.  Workers
    who skipped sentences yield partial trees, flagged via ``missing``.
    """
    per_worker: dict[str, dict[int, QudEntry]] = {}
    duplicates: list[DcqaQuestion] = []
    for q in questions:
        if q.article_id != doc.article_id:
            raise IngestError(
                f"question for article {q.article_id!r} passed with document "
                f"{doc.article_id!r}"
            )
        entries = per_worker.setdefault(q.worker_id, {})
        if q.answer_sentence_id in entries:
            duplicates.append(q)
            continue
        entries[q.answer_sentence_id] = QudEntry(
            answer_index=q.answer_sentence_id,
            anchor_index=q.anchor_sentence_id,
            question=q.question_text,
        )
    trees: dict[str, QudTree] = {}
    missing: dict[str, frozenset[int]] = {}
    for worker, entries in per_worker.items():
        trees[worker] = QudTree(
            article_id=doc.article_id, n=doc.n, entries=tuple(entries.values())
        )
        absent = frozenset(range(2, doc.n + 1)) - set(entries)
        if absent:
            missing[worker] = absent
            log.info(
                "article %s worker %s: partial tree, missing %s",
                doc.article_id, worker, sorted(absent),
            )
    return AnnotatorTreeSet(
        article_id=doc.article_id,
        trees=trees,
        missing=missing,
        duplicates=tuple(duplicates),
    )


@dataclass(frozen=True)
class TreeRecord:
    """One tree as stored on disk; may carry questions and may be partial."""

    article_id: str
    n: int
    root: int
    parents: Mapping[int, int]
    questions: "Mapping[int, str] | None" = None

    @property
    def is_complete(self) -> bool:
        expected = set(range(1, self.n + 1)) - {self.root}
        return set(self.parents) == expected

    def dep_tree(self) -> DepTree:
        if not self.is_complete:
            raise QudParseError(
                f"tree for article {self.article_id!r} is partial; "
                "no full dependency tree available"
            )
        return DepTree.from_parent_map(self.n, dict(self.parents), root=self.root)

    def qud_tree(self) -> QudTree:
        if self.questions is None:
            raise QudParseError(
                f"tree for article {self.article_id!r} carries no questions"
            )
        return QudTree(
            article_id=self.article_id,
            n=self.n,
            entries=tuple(
                QudEntry(answer_index=i, anchor_index=a, question=self.questions.get(i, ""))
                for i, a in self.parents.items()
            ),
        )


def tree_record_from_qud(tree: QudTree) -> TreeRecord:
    return TreeRecord(
        article_id=tree.article_id,
        n=tree.n,
        root=1,
        parents={e.answer_index: e.anchor_index for e in tree.entries},
        questions={e.answer_index: e.question for e in tree.entries},
    )


def tree_record_from_dep(article_id: str, dep: DepTree) -> TreeRecord:
    return TreeRecord(
        article_id=article_id,
        n=dep.n,
        root=dep.root,
        parents={i: dep.parent_of(i) for i in range(1, dep.n + 1) if i != dep.root},
    )


def load_tree_records(path: "str | Path") -> list[TreeRecord]:
    records: list[TreeRecord] = []
    for lineno, obj in _iter_json_lines(path):
        article_id = str(_get(obj, "article_id", str(path), lineno))
        n = int(_get(obj, "n", str(path), lineno))
        if "entries" in obj:
            parents: dict[int, int] = {}
            questions: dict[int, str] = {}
            for row in obj["entries"]:
                answer = int(row["answer"])
                parents[answer] = int(row["anchor"])
                questions[answer] = str(row.get("question", ""))
            records.append(
                TreeRecord(article_id=article_id, n=n, root=1,
                           parents=parents, questions=questions)
            )
        elif "parents" in obj:
            parents = {int(child): int(parent) for child, parent in obj["parents"].items()}
            records.append(
                TreeRecord(article_id=article_id, n=n,
                           root=int(obj.get("root", 1)), parents=parents)
            )
        else:
            raise IngestError(
                "tree record needs either entries or parents",
                path=str(path), line=lineno,
            )
    return records


def save_tree_records(records: Iterable[TreeRecord], handle: IO[str]) -> None:
    for rec in records:
        if rec.questions is not None:
            obj = {
                "article_id": rec.article_id,
                "n": rec.n,
                "entries": [
                    {"answer": i, "anchor": rec.parents[i], "question": rec.questions.get(i, "")}
                    for i in sorted(rec.parents)
                ],
            }
        else:
            obj = {
                "article_id": rec.article_id,
                "n": rec.n,
                "root": rec.root,
                "parents": {str(i): rec.parents[i] for i in sorted(rec.parents)},
            }
        handle.write(json.dumps(obj, ensure_ascii=False) + "\n")
