"""Wire-contract conformance checks, runnable against any backend.

By default these exercise the served deterministic mock through the HTTP
stack; point QUD_BACKEND_URL at a live server to run the same checks
against it.
"""

import os
import random

import pytest
from fastapi.testclient import TestClient

from qudparse.backend import (
    AnchorRequest,
    GenerateRequest,
    HttpBackend,
    MockBackend,
    NerRequest,
    RerankRequest,
    create_app,
)
from qudparse.core import Document
from qudparse.encoding import encode_anchor_query


@pytest.fixture(scope="module")
def backend():
    url = os.environ.get("QUD_BACKEND_URL")
    if url:
        with HttpBackend(base_url=url, timeout=120.0) as remote:
            yield remote
        return
    client = TestClient(create_app(MockBackend(seed=7)))
    yield HttpBackend(base_url="http://testserver", http_client=client)


@pytest.fixture(scope="module")
def doc():
    return Document.from_texts(
        "conf",
        [f"Sentence number {i} talks about topic {i * 7 % 5}." for i in range(1, 9)],
    )


def test_health_reports_status_and_four_model_ids(backend):
    health = backend.health()
    assert health.status
    assert {"anchor", "generate", "rerank", "ner"} <= set(health.model_ids)


def test_anchor_returns_legal_sentence_index(backend, doc):
    # The client raises on any reply with anchor_index outside 1..answer-1,
    # so a plain call already asserts the invariant.
    for answer_index in range(2, doc.n + 1):
        encoding = encode_anchor_query(doc, answer_index)
        reply = backend.anchor(
            AnchorRequest(encoding=encoding.text, n=doc.n, answer_index=answer_index)
        )
        assert 1 <= reply.anchor_index < answer_index
        if reply.scores is not None:
            assert len(reply.scores) == doc.n


def test_generate_respects_num_samples_and_nonempty(backend, doc):
    from qudparse.encoding import encode_generation_prompt

    prompt = encode_generation_prompt(doc, answer_index=4, anchor_index=2).render()
    for num_samples in (1, 3, 10):
        reply = backend.generate(
            GenerateRequest(prompt=prompt, num_samples=num_samples, top_p=0.9, seed=5)
        )
        assert 1 <= len(reply.questions) <= num_samples
        assert all(q.strip() for q in reply.questions)


def test_generate_accepts_top_p_sweep(backend, doc):
    from qudparse.encoding import encode_generation_prompt

    prompt = encode_generation_prompt(doc, answer_index=3, anchor_index=1).render()
    for top_p in (0.5, 0.9, 1.0):
        reply = backend.generate(GenerateRequest(prompt=prompt, num_samples=2,
                                                 top_p=top_p, seed=1))
        assert reply.questions


def test_rerank_scores_are_posteriors(backend):
    rng = random.Random(2)
    for _ in range(5):
        reply = backend.rerank(
            RerankRequest(
                question=f"Why did event {rng.randint(0, 9)} happen?",
                anchor_text="The storm made landfall overnight.",
                answer_text="Crews cleared the roads by morning.",
            )
        )
        assert 0.0 <= reply.score <= 1.0


def test_ner_spans_are_legal_for_the_tokens(backend):
    tokens = "Hurricane Hugo hit South Carolina in September".split()
    reply = backend.ner(NerRequest(tokens=tokens))
    claimed = set()
    for span in reply.spans:
        assert 0 <= span.token_start <= span.token_end < len(tokens)
        assert span.entity_type
        overlap = set(range(span.token_start, span.token_end + 1))
        assert not (claimed & overlap)
        claimed |= overlap


def test_responses_reserialize_identically(backend, doc):
    encoding = encode_anchor_query(doc, 3)
    reply = backend.anchor(AnchorRequest(encoding=encoding.text, n=doc.n, answer_index=3))
    assert type(reply).model_validate_json(reply.model_dump_json()) == reply
