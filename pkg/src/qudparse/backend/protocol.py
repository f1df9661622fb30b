"""Request/response models for the four backend endpoints.

Bodies are JSON; numeric scores ride as JSON numbers at full float
precision.  The models validate structure only; value-level invariants
(index ranges, score bounds, span legality) are enforced by the
``check_*`` functions so that a structurally well-formed but illegal
response is reported as a protocol violation rather than a parse error.

Anchor prediction works at the sentence-index level: the backend resolves
whatever span its model predicts down to a sentence index, keeping this
side free of tokenizers.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

from pydantic import BaseModel, Field

from qudparse.core import QudParseError


class ProtocolViolation(QudParseError):
    """A backend reply broke a protocol invariant."""


class AnchorRequest(BaseModel):
    encoding: str
    n: int = Field(ge=1)
    answer_index: int = Field(ge=2)


class AnchorResponse(BaseModel):
    anchor_index: int
    scores: "list[float] | None" = None


class GenerateRequest(BaseModel):
    prompt: str
    num_samples: int = Field(default=10, ge=1)
    top_p: float = Field(default=0.9, gt=0.0, le=1.0)
    # Optional per-request seed so sampling backends can reproduce output;
    # deterministic backends may ignore it.
    seed: "int | None" = None


class GenerateResponse(BaseModel):
    questions: list[str]


class RerankRequest(BaseModel):
    question: str
    anchor_text: str
    answer_text: str


class RerankResponse(BaseModel):
    score: float


class NerRequest(BaseModel):
    tokens: list[str]


class WireSpan(BaseModel):
    """Entity span over the request's token list, inclusive and 0-based."""

    token_start: int = Field(ge=0)
    token_end: int = Field(ge=0)
    entity_type: str


class NerResponse(BaseModel):
    spans: list[WireSpan] = Field(default_factory=list)


class HealthResponse(BaseModel):
    status: str
    model_ids: dict[str, str]


def check_anchor_response(response: AnchorResponse, request: AnchorRequest) -> AnchorResponse:
    if not 1 <= response.anchor_index <= request.answer_index - 1:
        raise ProtocolViolation(
            f"anchor_index {response.anchor_index} outside 1..{request.answer_index - 1} "
            f"(anchors must precede answer {request.answer_index})"
        )
    if response.scores is not None and len(response.scores) != request.n:
        raise ProtocolViolation(
            f"scores has {len(response.scores)} entries for n={request.n}"
        )
    return response


def check_generate_response(
    response: GenerateResponse, request: GenerateRequest
) -> GenerateResponse:
    if not response.questions:
        raise ProtocolViolation("no questions returned")
    if len(response.questions) > request.num_samples:
        raise ProtocolViolation(
            f"{len(response.questions)} questions exceed num_samples={request.num_samples}"
        )
    for k, question in enumerate(response.questions):
        if not question.strip():
            raise ProtocolViolation(f"question {k} is empty")
    return response


def check_rerank_response(response: RerankResponse, request: RerankRequest) -> RerankResponse:
    if not 0.0 <= response.score <= 1.0:
        raise ProtocolViolation(f"score {response.score} outside [0, 1]")
    return response


def check_ner_response(response: NerResponse, request: NerRequest) -> NerResponse:
    claimed = [False] * len(request.tokens)
    for span in response.spans:
        if span.token_end < span.token_start:
            raise ProtocolViolation(
                f"span end {span.token_end} precedes start {span.token_start}"
            )
        if span.token_end >= len(request.tokens):
            raise ProtocolViolation(
                f"span {span.token_start}..{span.token_end} exceeds "
                f"{len(request.tokens)} tokens"
            )
        for position in range(span.token_start, span.token_end + 1):
            if claimed[position]:
                raise ProtocolViolation(f"overlapping spans at token {position}")
            claimed[position] = True
        if not span.entity_type:
            raise ProtocolViolation("span with empty entity_type")
    return response


@runtime_checkable
class Backend(Protocol):
    """Anything that can answer the four endpoint calls in process."""

    def anchor(self, request: AnchorRequest) -> AnchorResponse: ...

    def generate(self, request: GenerateRequest) -> GenerateResponse: ...

    def rerank(self, request: RerankRequest) -> RerankResponse: ...

    def ner(self, request: NerRequest) -> NerResponse: ...

    def health(self) -> HealthResponse: ...
