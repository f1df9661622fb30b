import io
import json

import pytest

from qudparse.core import Document
from qudparse.ingest import (
    AnnotatorTreeSet,
    DcqaQuestion,
    IngestError,
    build_trees,
    load_articles,
    load_questions,
    load_tree_records,
    questions_from_rows,
    save_articles,
    save_questions,
    save_tree_records,
    tree_record_from_qud,
)


def write_lines(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for rec in records:
            handle.write(json.dumps(rec) + "\n")


ARTICLE = {
    "article_id": "a1",
    "sentences": [
        {"index": 1, "text": "Rain fell."},
        {"index": 2, "text": "Streets flooded."},
        {"index": 3, "text": "Schools closed."},
    ],
}


def test_load_articles_single(tmp_path):
    path = tmp_path / "articles.jsonl"
    write_lines(path, [ARTICLE])
    docs = load_articles(path)
    assert len(docs) == 1
    assert docs[0].n == 3
    assert docs[0].sentence(2).text == "Streets flooded."


def test_load_articles_gap_in_ids(tmp_path):
    path = tmp_path / "articles.jsonl"
    bad = {
        "article_id": "a1",
        "sentences": [{"index": 1, "text": "One."}, {"index": 2, "text": "Two."}, {"index": 4, "text": "Four."}],
    }
    write_lines(path, [bad])
    with pytest.raises(IngestError, match="contiguous"):
        load_articles(path)


def test_load_articles_empty_file(tmp_path):
    path = tmp_path / "articles.jsonl"
    path.write_text("")
    assert load_articles(path) == []


def test_load_articles_duplicate_id(tmp_path):
    path = tmp_path / "articles.jsonl"
    write_lines(path, [ARTICLE, ARTICLE])
    with pytest.raises(IngestError, match="duplicate article_id"):
        load_articles(path)


def test_load_articles_error_names_file_and_line(tmp_path):
    path = tmp_path / "articles.jsonl"
    write_lines(path, [ARTICLE, {"article_id": "a2"}])
    with pytest.raises(IngestError) as exc:
        load_articles(path)
    assert exc.value.line == 2
    assert exc.value.fieldname == "sentences"
    assert str(path) in str(exc.value)


def question_row(**overrides):
    row = {
        "article_id": "a1",
        "worker_id": "w1",
        "answer_sentence_id": 7,
        "anchor_sentence_id": 3,
        "question_text": "Why?",
    }
    row.update(overrides)
    return row


def test_load_questions_accepts_ordered_record(tmp_path):
    path = tmp_path / "q.jsonl"
    write_lines(path, [question_row()])
    records = load_questions(path)
    assert len(records) == 1
    assert records[0].anchor_sentence_id == 3


def test_load_questions_rejects_reversed_and_self(tmp_path, caplog):
    path = tmp_path / "q.jsonl"
    write_lines(
        path,
        [
            question_row(anchor_sentence_id=7, answer_sentence_id=3),
            question_row(anchor_sentence_id=3, answer_sentence_id=3),
            question_row(),
        ],
    )
    with caplog.at_level("WARNING"):
        records = load_questions(path)
    assert len(records) == 1
    assert sum("rejected question record" in m for m in caplog.messages) == 2


def test_load_questions_unknown_article_kept_with_warning(tmp_path, caplog):
    path = tmp_path / "q.jsonl"
    write_lines(path, [question_row(article_id="ghost", answer_sentence_id=2, anchor_sentence_id=1)])
    doc = Document.from_texts("a1", ["One.", "Two."])
    with caplog.at_level("WARNING"):
        records = load_questions(path, documents=[doc])
    assert len(records) == 1
    assert any("unknown article_id" in m for m in caplog.messages)


def test_load_questions_out_of_range_for_known_article_dropped(tmp_path, caplog):
    path = tmp_path / "q.jsonl"
    write_lines(path, [question_row(answer_sentence_id=9, anchor_sentence_id=1)])
    doc = Document.from_texts("a1", ["One.", "Two.", "Three."])
    with caplog.at_level("WARNING"):
        records = load_questions(path, documents=[doc])
    assert records == []


def make_q(worker, anchor, answer, text="q"):
    return DcqaQuestion(
        article_id="a1",
        worker_id=worker,
        answer_sentence_id=answer,
        anchor_sentence_id=anchor,
        question_text=text,
    )


def test_build_trees_complete_single_worker():
    doc = Document.from_texts("a1", ["One.", "Two.", "Three."])
    trees = build_trees([make_q("A", 1, 2), make_q("A", 2, 3)], doc)
    assert isinstance(trees, AnnotatorTreeSet)
    assert set(trees.trees) == {"A"}
    assert trees.trees["A"].is_complete
    assert trees.missing == {}


def test_build_trees_partial_flagged():
    doc = Document.from_texts("a1", ["One.", "Two.", "Three."])
    trees = build_trees([make_q("A", 1, 2)], doc)
    assert trees.missing["A"] == frozenset({3})
    assert not trees.trees["A"].is_complete


def test_build_trees_two_workers_independent():
    doc = Document.from_texts("a1", ["One.", "Two.", "Three."])
    qs = [make_q("A", 1, 2), make_q("A", 2, 3), make_q("B", 1, 2), make_q("B", 1, 3)]
    trees = build_trees(qs, doc)
    assert trees.trees["A"].entry_for(3).anchor_index == 2
    assert trees.trees["B"].entry_for(3).anchor_index == 1


def test_build_trees_duplicate_keeps_first_in_file_order():
    doc = Document.from_texts("a1", ["One.", "Two.", "Three."])
    qs = [make_q("A", 1, 3, "first"), make_q("A", 2, 3, "second"), make_q("A", 1, 2)]
    trees = build_trees(qs, doc)
    assert trees.trees["A"].entry_for(3).question == "first"
    assert len(trees.duplicates) == 1
    assert trees.duplicates[0].question_text == "second"


def test_build_trees_never_invents_entries():
    doc = Document.from_texts("a1", ["One.", "Two.", "Three.", "Four."])
    qs = [make_q("A", 1, 2), make_q("A", 2, 4)]
    trees = build_trees(qs, doc)
    produced = [
        (e.answer_index, e.anchor_index, e.question)
        for e in trees.trees["A"].entries
    ]
    source = [(q.answer_sentence_id, q.anchor_sentence_id, q.question_text) for q in qs]
    assert sorted(produced) == sorted(source)


def test_build_trees_wrong_article_rejected():
    doc = Document.from_texts("other", ["One.", "Two."])
    with pytest.raises(IngestError):
        build_trees([make_q("A", 1, 2)], doc)


def test_articles_round_trip(tmp_path):
    path = tmp_path / "articles.jsonl"
    messy = {
        "article_id": "a1",
        "sentences": [{"index": 1, "text": "  Rain   fell. "}, {"index": 2, "text": "Snow\ttoo."}],
    }
    write_lines(path, [messy])
    docs = load_articles(path)
    out = io.StringIO()
    save_articles(docs, out)
    reloaded = json.loads(out.getvalue())
    assert reloaded["sentences"][0]["text"] == "Rain fell."
    assert reloaded["sentences"][1]["text"] == "Snow too."


def test_questions_round_trip(tmp_path):
    path = tmp_path / "q.jsonl"
    rows = [question_row(), question_row(worker_id="w2", question_text="How?")]
    write_lines(path, rows)
    out = io.StringIO()
    save_questions(load_questions(path), out)
    assert [json.loads(line) for line in out.getvalue().splitlines()] == rows


def test_questions_from_rows_adapter():
    foreign = [{"art": "a1", "turk": "w9", "ans": 4, "anc": 2, "q": "Why?"}]
    mapped = list(
        questions_from_rows(
            foreign,
            {
                "article_id": "art",
                "worker_id": "turk",
                "answer_sentence_id": "ans",
                "anchor_sentence_id": "anc",
                "question_text": "q",
            },
        )
    )
    assert mapped[0]["worker_id"] == "w9"
    assert mapped[0]["question_text"] == "Why?"


def test_tree_records_round_trip(tmp_path):
    from qudparse.core import QudTree

    tree = QudTree.from_mapping("a1", 3, {2: (1, "Why?"), 3: (1, "How?")})
    out = io.StringIO()
    save_tree_records([tree_record_from_qud(tree)], out)
    path = tmp_path / "trees.jsonl"
    path.write_text(out.getvalue(), encoding="utf-8")
    records = load_tree_records(path)
    assert records[0].qud_tree() == tree
    assert records[0].dep_tree().parents == (0, 1, 1)


def test_dep_tree_records_round_trip(tmp_path):
    from qudparse.core import DepTree
    from qudparse.ingest import tree_record_from_dep

    dep = DepTree.from_parent_map(3, {1: 2, 3: 2}, root=2)
    out = io.StringIO()
    save_tree_records([tree_record_from_dep("a9", dep)], out)
    path = tmp_path / "trees.jsonl"
    path.write_text(out.getvalue(), encoding="utf-8")
    records = load_tree_records(path)
    assert records[0].root == 2
    assert records[0].dep_tree() == dep
    assert not json.loads(out.getvalue()).get("entries")
