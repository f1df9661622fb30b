"""Greedy document parser: anchor, mask, sample, rerank, assemble.

Each sentence after the first is processed independently: its anchor is
predicted from the full document, candidate questions are sampled with
the answer sentence entity-masked (both optional), and the best-scoring
candidate labels the edge.  No projectivity or other structural
constraint is imposed beyond anchors preceding their answers, and no
global search happens: question probabilities never feed back into the
structure.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from qudparse.backend.client import BackendError
from qudparse.backend.protocol import (
    AnchorRequest,
    Backend,
    GenerateRequest,
    NerRequest,
    ProtocolViolation,
    RerankRequest,
    check_anchor_response,
    check_generate_response,
    check_ner_response,
    check_rerank_response,
)
from qudparse.core import Document, QudEntry, QudParseError, QudTree, validate_tree
from qudparse.encoding import EntitySpan, encode_anchor_query, encode_generation_prompt

log = logging.getLogger(__name__)

FAIL_FAST = "fast"
FAIL_SKIP = "skip"


class PipelineError(QudParseError):
    """A sentence could not be parsed under the fail-fast policy."""

    def __init__(self, answer_index: int, stage: str, cause: Exception):
        self.answer_index = answer_index
        self.stage = stage
        super().__init__(f"sentence {answer_index} failed at {stage}: {cause}")


@dataclass(frozen=True)
class ParseConfig:
    """Decoding and orchestration knobs; defaults are the full system."""

    num_samples: int = 10
    top_p: float = 0.9
    mask_entities: bool = True
    rerank: bool = True
    seed: int = 0
    fail_policy: str = FAIL_FAST
    max_workers: int = 1

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.fail_policy not in (FAIL_FAST, FAIL_SKIP):
            raise ValueError(f"fail_policy must be 'fast' or 'skip', got {self.fail_policy!r}")
        if self.max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {self.max_workers}")


# Ablations nest: dropping entity masking also drops reranking.
VARIANTS = {
    "full": {},
    "-reranking": {"rerank": False},
    "-ner": {"rerank": False, "mask_entities": False},
}
_VARIANT_ALIASES = {
    "no-rerank": "-reranking",
    "no-rerank-no-mask": "-ner",
}


def variant_config(name: str, seed: int = 0, **overrides) -> ParseConfig:
    """Config for a named system variant ('full', '-Reranking', '-NER')."""
    key = _VARIANT_ALIASES.get(name.lower(), name.lower())
    if key not in VARIANTS:
        known = sorted(set(VARIANTS) | set(_VARIANT_ALIASES))
        raise ValueError(f"unknown variant {name!r}; expected one of {known}")
    return replace(ParseConfig(seed=seed, **overrides), **VARIANTS[key])


@dataclass(frozen=True)
class Candidate:
    question: str
    score: "float | None"


@dataclass(frozen=True)
class SentenceTrace:
    answer_index: int
    anchor_index: int
    candidates: tuple[Candidate, ...]
    winner_index: int
    elapsed_s: float

    @property
    def winner(self) -> Candidate:
        return self.candidates[self.winner_index]


@dataclass(frozen=True)
class SentenceFailure:
    answer_index: int
    stage: str
    error: str


@dataclass(frozen=True)
class ParseTrace:
    article_id: str
    variant: "str | None"
    sentences: tuple[SentenceTrace, ...]
    failures: tuple[SentenceFailure, ...] = ()
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "article_id": self.article_id,
            "variant": self.variant,
            "sentences": [
                {
                    "answer_index": s.answer_index,
                    "anchor_index": s.anchor_index,
                    "candidates": [
                        {"question": c.question, "score": c.score} for c in s.candidates
                    ],
                    "winner_index": s.winner_index,
                    "elapsed_s": s.elapsed_s,
                }
                for s in self.sentences
            ],
            "failures": [
                {"answer_index": f.answer_index, "stage": f.stage, "error": f.error}
                for f in self.failures
            ],
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class ParseResult:
    tree: QudTree
    trace: ParseTrace

    @property
    def complete(self) -> bool:
        return not self.trace.failures


def _parse_sentence(
    doc: Document, answer_index: int, backend: Backend, config: ParseConfig
) -> SentenceTrace:
    started = time.perf_counter()
    stage = "/anchor"
    try:
        anchor_request = AnchorRequest(
            encoding=encode_anchor_query(doc, answer_index).text,
            n=doc.n,
            answer_index=answer_index,
        )
        anchor_index = check_anchor_response(
            backend.anchor(anchor_request), anchor_request
        ).anchor_index

        spans: list[EntitySpan] = []
        if config.mask_entities:
            stage = "/ner"
            ner_request = NerRequest(tokens=list(doc.sentence(answer_index).tokens))
            tagged = check_ner_response(backend.ner(ner_request), ner_request)
            spans = [
                EntitySpan(
                    sentence_index=answer_index,
                    token_start=span.token_start,
                    token_end=span.token_end,
                    entity_type=span.entity_type,
                )
                for span in tagged.spans
            ]

        stage = "/generate"
        prompt = encode_generation_prompt(doc, answer_index, anchor_index, spans)
        generate_request = GenerateRequest(
            prompt=prompt.render(),
            num_samples=config.num_samples,
            top_p=config.top_p,
            seed=config.seed,
        )
        questions = check_generate_response(
            backend.generate(generate_request), generate_request
        ).questions

        if config.rerank:
            stage = "/rerank"
            anchor_text = doc.sentence(anchor_index).text
            answer_text = doc.sentence(answer_index).text
            candidates = []
            for question in questions:
                rerank_request = RerankRequest(
                    question=question, anchor_text=anchor_text, answer_text=answer_text
                )
                score = check_rerank_response(
                    backend.rerank(rerank_request), rerank_request
                ).score
                candidates.append(Candidate(question=question, score=score))
            best = max(c.score for c in candidates)
            winner_index = next(
                k for k, c in enumerate(candidates) if c.score == best
            )
        else:
            candidates = [Candidate(question=q, score=None) for q in questions]
            winner_index = 0
    except (BackendError, ProtocolViolation) as exc:
        raise PipelineError(answer_index, stage, exc) from exc
    return SentenceTrace(
        answer_index=answer_index,
        anchor_index=anchor_index,
        candidates=tuple(candidates),
        winner_index=winner_index,
        elapsed_s=time.perf_counter() - started,
    )


def parse(
    doc: Document,
    backend: Backend,
    config: "ParseConfig | None" = None,
    variant: "str | None" = None,
) -> ParseResult:
    """Parse one document into a question-labeled tree plus an audit trace.

    Sentences are processed independently (concurrently when configured)
    and assembled in index order, so results do not depend on completion
    order.  Under ``fail_policy='skip'`` a backend failure leaves that
    sentence's entry absent and the partial tree is flagged in the trace.
    """
    config = config or ParseConfig()
    notes: list[str] = []
    if doc.n == 1:
        notes.append("single-sentence document: bare root tree, nothing to parse")
        trace = ParseTrace(article_id=doc.article_id, variant=variant,
                           sentences=(), notes=tuple(notes))
        return ParseResult(tree=QudTree(doc.article_id, 1, ()), trace=trace)

    indices = list(range(2, doc.n + 1))
    traces: dict[int, SentenceTrace] = {}
    failures: list[SentenceFailure] = []

    def handle(error: PipelineError) -> None:
        if config.fail_policy == FAIL_FAST:
            raise error
        log.warning("skipping sentence %d: %s", error.answer_index, error)
        failures.append(
            SentenceFailure(
                answer_index=error.answer_index,
                stage=error.stage,
                error=str(error.__cause__ or error),
            )
        )

    if config.max_workers == 1:
        for i in indices:
            try:
                traces[i] = _parse_sentence(doc, i, backend, config)
            except PipelineError as exc:
                handle(exc)
    else:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            futures = {i: pool.submit(_parse_sentence, doc, i, backend, config)
                       for i in indices}
            try:
                for i in indices:
                    try:
                        traces[i] = futures[i].result()
                    except PipelineError as exc:
                        handle(exc)
            finally:
                for future in futures.values():
                    future.cancel()

    entries = tuple(
        QudEntry(
            answer_index=i,
            anchor_index=traces[i].anchor_index,
            question=traces[i].winner.question,
        )
        for i in sorted(traces)
    )
    tree = QudTree(article_id=doc.article_id, n=doc.n, entries=entries)
    if failures:
        notes.append(
            "partial tree: missing entries for "
            + ", ".join(str(f.answer_index) for f in failures)
        )
    else:
        report = validate_tree(tree, doc)
        if not report.ok:
            raise QudParseError(
                f"assembled tree failed validation: {report.violations}"
            )
    trace = ParseTrace(
        article_id=doc.article_id,
        variant=variant,
        sentences=tuple(traces[i] for i in sorted(traces)),
        failures=tuple(failures),
        notes=tuple(notes),
    )
    return ParseResult(tree=tree, trace=trace)


def parse_variant(
    doc: Document, backend: Backend, name: str, seed: int = 0, **overrides
) -> ParseResult:
    """Parse with a named ablation; the result's trace carries the name."""
    return parse(doc, backend, variant_config(name, seed=seed, **overrides), variant=name)
