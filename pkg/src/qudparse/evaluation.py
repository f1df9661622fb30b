"""Human-judgment aggregation and reranker evaluation utilities.

Judges answer two questions about each generated question: whether it is
reasonable given context up to the anchor (fine-grained labels with
coarse groups), and whether the target sentence actually answers it.
Percentages are over judge responses, not questions; the second question
is reported on the subset of questions whose first-question labels were
unanimously "yes" or "minor error".
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

from qudparse.agreement import krippendorff_alpha
from qudparse.core import Document, QudParseError
from qudparse.ingest import DcqaQuestion, IngestError, _iter_json_lines


class EvaluationError(QudParseError):
    """Aggregation precondition failed (uneven judges, empty denominator)."""


class Q1Coarse(str, Enum):
    YES = "yes"
    MINOR_ERROR = "minor_error"
    SORT_OF = "sort_of"
    NO = "no"


class Q1Label(str, Enum):
    """Fine-grained acceptability labels; each maps to one coarse group."""

    YES = "yes"
    MINOR_ERROR = "minor_error"
    HALLU_MINOR = "hallu_minor"
    ANS_MINOR = "ans_minor"
    NONSENSE = "nonsense"
    IRRELEVANT_ANCHOR = "irrelevant_anchor"
    IRRELEVANT_SENTENCE = "irrelevant_sentence"
    HALLU_MAJOR = "hallu_major"
    ANS_MAJOR = "ans_major"

    @property
    def coarse(self) -> Q1Coarse:
        return _COARSE_OF[self]


_COARSE_OF = {
    Q1Label.YES: Q1Coarse.YES,
    Q1Label.MINOR_ERROR: Q1Coarse.MINOR_ERROR,
    Q1Label.HALLU_MINOR: Q1Coarse.SORT_OF,
    Q1Label.ANS_MINOR: Q1Coarse.SORT_OF,
    Q1Label.NONSENSE: Q1Coarse.NO,
    Q1Label.IRRELEVANT_ANCHOR: Q1Coarse.NO,
    Q1Label.IRRELEVANT_SENTENCE: Q1Coarse.NO,
    Q1Label.HALLU_MAJOR: Q1Coarse.NO,
    Q1Label.ANS_MAJOR: Q1Coarse.NO,
}

Q1_COLUMN_ORDER: tuple[Q1Label, ...] = (
    Q1Label.YES,
    Q1Label.MINOR_ERROR,
    Q1Label.HALLU_MINOR,
    Q1Label.ANS_MINOR,
    Q1Label.NONSENSE,
    Q1Label.IRRELEVANT_ANCHOR,
    Q1Label.IRRELEVANT_SENTENCE,
    Q1Label.HALLU_MAJOR,
    Q1Label.ANS_MAJOR,
)

Q1_DISPLAY = {
    Q1Label.YES: "Yes",
    Q1Label.MINOR_ERROR: "Minor error",
    Q1Label.HALLU_MINOR: "Hallu.(m)",
    Q1Label.ANS_MINOR: "Ans.(m)",
    Q1Label.NONSENSE: "Nonsense",
    Q1Label.IRRELEVANT_ANCHOR: "Irre.(a)",
    Q1Label.IRRELEVANT_SENTENCE: "Irre.(s)",
    Q1Label.HALLU_MAJOR: "Hallu.(M)",
    Q1Label.ANS_MAJOR: "Ans.(M)",
}


class Q2Label(str, Enum):
    YES = "yes"
    NOT_MAIN_POINT = "not_main_point"
    SORT_OF = "sort_of"
    NO = "no"
    SKIPPED = "skipped"


Q2_COLUMN_ORDER: tuple[Q2Label, ...] = (
    Q2Label.YES,
    Q2Label.NOT_MAIN_POINT,
    Q2Label.SORT_OF,
    Q2Label.NO,
)

Q2_DISPLAY = {
    Q2Label.YES: "Yes",
    Q2Label.NOT_MAIN_POINT: "Not main point",
    Q2Label.SORT_OF: "Sort of",
    Q2Label.NO: "No",
}


@dataclass(frozen=True)
class JudgmentRecord:
    """One judge's labels for one generated question."""

    question_id: str
    judge_id: str
    q1: Q1Label
    q2: Q2Label


def load_judgments(path: "str | Path") -> list[JudgmentRecord]:
    """Load a judgment file: one JSON object per line with fields
    question_id, judge_id, q1_fine_label, q2_label."""
    records: list[JudgmentRecord] = []
    for lineno, obj in _iter_json_lines(path):
        try:
            records.append(
                JudgmentRecord(
                    question_id=str(obj["question_id"]),
                    judge_id=str(obj["judge_id"]),
                    q1=Q1Label(obj["q1_fine_label"]),
                    q2=Q2Label(obj["q2_label"]),
                )
            )
        except KeyError as exc:
            raise IngestError("missing field", path=str(path), line=lineno,
                              fieldname=exc.args[0])
        except ValueError as exc:
            raise IngestError(f"unknown label: {exc}", path=str(path), line=lineno)
    return records


def save_judgments(records: Iterable[JudgmentRecord], handle: IO[str]) -> None:
    for rec in records:
        handle.write(
            json.dumps(
                {
                    "question_id": rec.question_id,
                    "judge_id": rec.judge_id,
                    "q1_fine_label": rec.q1.value,
                    "q2_label": rec.q2.value,
                },
                ensure_ascii=False,
            )
            + "\n"
        )


@dataclass(frozen=True)
class Q1Aggregate:
    """Percentages of judge responses per fine label and coarse group."""

    fine: Mapping[Q1Label, float]
    coarse: Mapping[Q1Coarse, float]
    total_responses: int


def aggregate_q1(records: Sequence[JudgmentRecord]) -> Q1Aggregate:
    if not records:
        raise EvaluationError("cannot aggregate an empty record set")
    total = len(records)
    fine_counts = Counter(rec.q1 for rec in records)
    coarse_counts = Counter(rec.q1.coarse for rec in records)
    return Q1Aggregate(
        fine={label: 100.0 * fine_counts[label] / total for label in Q1Label},
        coarse={group: 100.0 * coarse_counts[group] / total for group in Q1Coarse},
        total_responses=total,
    )


def _by_question(records: Iterable[JudgmentRecord]) -> dict[str, list[JudgmentRecord]]:
    grouped: dict[str, list[JudgmentRecord]] = defaultdict(list)
    for rec in records:
        grouped[rec.question_id].append(rec)
    return dict(grouped)


def _require_even_judges(grouped: Mapping[str, list[JudgmentRecord]]) -> int:
    sizes = {qid: len(recs) for qid, recs in grouped.items()}
    counts = set(sizes.values())
    if len(counts) > 1:
        expected = Counter(sizes.values()).most_common(1)[0][0]
        offenders = sorted(q for q, size in sizes.items() if size != expected)
        raise EvaluationError(
            f"uneven judge counts: questions {offenders} differ from the "
            f"majority count {expected}"
        )
    return counts.pop() if counts else 0


def q2_subset(records: Sequence[JudgmentRecord]) -> list[str]:
    """Question ids eligible for answerability reporting: every judge rated
    the question "yes" or "minor error"."""
    grouped = _by_question(records)
    _require_even_judges(grouped)
    acceptable = {Q1Label.YES, Q1Label.MINOR_ERROR}
    return sorted(
        qid for qid, recs in grouped.items() if all(r.q1 in acceptable for r in recs)
    )


@dataclass(frozen=True)
class Q2Aggregate:
    percentages: Mapping[Q2Label, float]
    total_responses: int
    skipped: int


def aggregate_q2(records: Sequence[JudgmentRecord]) -> Q2Aggregate:
    """Percentages over answerability labels; skipped responses leave the
    denominator."""
    answered = [rec for rec in records if rec.q2 is not Q2Label.SKIPPED]
    if not answered:
        raise EvaluationError("empty denominator: every response skipped the question")
    counts = Counter(rec.q2 for rec in answered)
    total = len(answered)
    return Q2Aggregate(
        percentages={label: 100.0 * counts[label] / total for label in Q2_COLUMN_ORDER},
        total_responses=total,
        skipped=len(records) - total,
    )


def restrict_to_q2_subset(records: Sequence[JudgmentRecord]) -> list[JudgmentRecord]:
    eligible = set(q2_subset(records))
    return [rec for rec in records if rec.question_id in eligible]


@dataclass(frozen=True)
class AgreementSummary:
    """Unanimity and chance-corrected agreement over first-question labels."""

    all_agree_pct: float
    majority_pct: float
    alpha_yes_vs_others: float
    alpha_coarse: float
    alpha_fine: float
    judges: int
    questions: int


def agreement_summary(records: Sequence[JudgmentRecord]) -> AgreementSummary:
    grouped = _by_question(records)
    if not grouped:
        raise EvaluationError("cannot summarize an empty record set")
    judges = _require_even_judges(grouped)
    unanimous = 0
    majority = 0
    for recs in grouped.values():
        counts = Counter(r.q1 for r in recs)
        top = counts.most_common(1)[0][1]
        if top == len(recs):
            unanimous += 1
        if top * 2 > len(recs):
            majority += 1
    total = len(grouped)

    judge_ids = sorted({rec.judge_id for rec in records})
    column = {judge: k for k, judge in enumerate(judge_ids)}

    def matrix(project):
        rows = []
        for recs in grouped.values():
            row: list = [None] * len(judge_ids)
            for rec in recs:
                row[column[rec.judge_id]] = project(rec.q1)
            rows.append(row)
        return rows

    return AgreementSummary(
        all_agree_pct=100.0 * unanimous / total,
        majority_pct=100.0 * majority / total,
        alpha_yes_vs_others=krippendorff_alpha(
            matrix(lambda q1: "yes" if q1 is Q1Label.YES else "other"), "nominal"
        ),
        alpha_coarse=krippendorff_alpha(matrix(lambda q1: q1.coarse.value), "nominal"),
        alpha_fine=krippendorff_alpha(matrix(lambda q1: q1.value), "nominal"),
        judges=judges,
        questions=total,
    )


@dataclass(frozen=True)
class RerankExample:
    """A (question, anchor, answer) pair with a classification label.

    Synthetic negatives deliberately skip validity filtering, so the
    indices here may violate anchor-precedence; this type therefore does
    not enforce it.
    """

    article_id: str
    question_text: str
    anchor_index: int
    answer_index: int
    label: str


def synth_negatives(question: DcqaQuestion, doc: Document) -> list[RerankExample]:
    """Synthesize reranker negatives from one annotated question by swapping
    the anchor, then the answer, with every other sentence of the article.

    Emits exactly 2 * (n - 1) examples, without deduplication: a swap that
    happens to coincide with another annotator's gold pair is still a
    negative.
    """
    if doc.n < 2:
        raise ValueError(f"article {doc.article_id!r} has fewer than 2 sentences")
    if question.article_id != doc.article_id:
        raise ValueError(
            f"question belongs to {question.article_id!r}, not {doc.article_id!r}"
        )
    negatives: list[RerankExample] = []
    for s in range(1, doc.n + 1):
        if s != question.anchor_sentence_id:
            negatives.append(
                RerankExample(
                    article_id=doc.article_id,
                    question_text=question.question_text,
                    anchor_index=s,
                    answer_index=question.answer_sentence_id,
                    label="negative",
                )
            )
    for s in range(1, doc.n + 1):
        if s != question.answer_sentence_id:
            negatives.append(
                RerankExample(
                    article_id=doc.article_id,
                    question_text=question.question_text,
                    anchor_index=question.anchor_sentence_id,
                    answer_index=s,
                    label="negative",
                )
            )
    return negatives


@dataclass(frozen=True)
class RerankEvalInstance:
    """Rank of the gold option among a candidate pool, 1-based."""

    gold_rank: int
    num_options: int

    def __post_init__(self) -> None:
        if self.num_options < 2:
            raise ValueError(f"num_options must be >= 2, got {self.num_options}")
        if not 1 <= self.gold_rank <= self.num_options:
            raise ValueError(
                f"gold_rank {self.gold_rank} outside 1..{self.num_options}"
            )


def rerank_percentile(instances: Sequence[RerankEvalInstance]) -> float:
    """Mean percentile of the gold option, as a percentage; first place is
    0% and last place 100%, so lower is better."""
    if not instances:
        raise ValueError("need at least one instance")
    return 100.0 * sum(
        (inst.gold_rank - 1) / (inst.num_options - 1) for inst in instances
    ) / len(instances)


@dataclass(frozen=True)
class AnchorAgreement:
    rate: float
    matches: int
    instances: int
    missing: tuple[tuple[str, int], ...]


def anchor_agreement(
    predicted: Mapping[tuple[str, int], int], gold: Iterable[DcqaQuestion]
) -> AnchorAgreement:
    """Fraction of gold annotations whose anchor the model reproduced.

    ``predicted`` maps (article_id, answer_sentence_id) to the predicted
    anchor.  Each annotator's record is a separate instance; a missing
    prediction counts as a mismatch and is reported.
    """
    matches = 0
    total = 0
    missing: list[tuple[str, int]] = []
    for record in gold:
        total += 1
        key = (record.article_id, record.answer_sentence_id)
        if key not in predicted:
            missing.append(key)
            continue
        if predicted[key] == record.anchor_sentence_id:
            matches += 1
    if total == 0:
        raise ValueError("no gold instances given")
    return AnchorAgreement(
        rate=matches / total,
        matches=matches,
        instances=total,
        missing=tuple(sorted(set(missing))),
    )
