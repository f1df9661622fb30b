"""Deterministic in-process backend for hermetic runs and tests.

Every reply is a pure function of (seed, request): the anchor is always
the sentence right before the answer, questions are templated from the
anchor's first tokens, rerank scores hash the question with the seed,
and tagging returns no entities.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from qudparse.backend.protocol import (
    AnchorRequest,
    AnchorResponse,
    GenerateRequest,
    GenerateResponse,
    HealthResponse,
    NerRequest,
    NerResponse,
    RerankRequest,
    RerankResponse,
)
from qudparse.encoding import SEP

_HASH_DENOMINATOR = float(2**64)


@dataclass(frozen=True)
class MockBackend:
    seed: int = 0

    def anchor(self, request: AnchorRequest) -> AnchorResponse:
        return AnchorResponse(anchor_index=request.answer_index - 1)

    def generate(self, request: GenerateRequest) -> GenerateResponse:
        parts = request.prompt.split(f" {SEP} ")
        anchor_text = parts[1] if len(parts) >= 2 else parts[0]
        prefix = " ".join(anchor_text.split(" ")[:5])
        return GenerateResponse(
            questions=[
                f"What happened after {prefix}? (sample {k})"
                for k in range(1, request.num_samples + 1)
            ]
        )

    def rerank(self, request: RerankRequest) -> RerankResponse:
        digest = hashlib.sha256(
            f"{self.seed}\x00{request.question}".encode("utf-8")
        ).digest()
        value = int.from_bytes(digest[:8], "big") / _HASH_DENOMINATOR
        return RerankResponse(score=value)

    def ner(self, request: NerRequest) -> NerResponse:
        return NerResponse(spans=[])

    def health(self) -> HealthResponse:
        return HealthResponse(
            status="ok",
            model_ids={
                "anchor": f"mock-anchor-{self.seed}",
                "generate": f"mock-generate-{self.seed}",
                "rerank": f"mock-rerank-{self.seed}",
                "ner": f"mock-ner-{self.seed}",
            },
        )
