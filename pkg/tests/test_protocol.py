import random

import pytest

from qudparse.backend.mock import MockBackend
from qudparse.backend.protocol import (
    AnchorRequest,
    AnchorResponse,
    GenerateRequest,
    GenerateResponse,
    NerRequest,
    NerResponse,
    ProtocolViolation,
    RerankRequest,
    RerankResponse,
    WireSpan,
    check_anchor_response,
    check_generate_response,
    check_ner_response,
    check_rerank_response,
)


def random_text(rng, words=6):
    return " ".join(
        rng.choice(["storm", "flood", "relief", "crews", "north", "coast"])
        for _ in range(words)
    )


def test_wire_round_trip_on_random_messages():
    rng = random.Random(31)
    for _ in range(100):
        messages = [
            AnchorRequest(encoding=random_text(rng), n=rng.randint(2, 40),
                          answer_index=rng.randint(2, 40)),
            AnchorResponse(anchor_index=rng.randint(1, 40),
                           scores=[rng.random() for _ in range(rng.randint(0, 5))] or None),
            GenerateRequest(prompt=random_text(rng), num_samples=rng.randint(1, 10),
                            top_p=rng.uniform(0.1, 1.0),
                            seed=rng.randint(0, 99) if rng.random() < 0.5 else None),
            GenerateResponse(questions=[random_text(rng) for _ in range(rng.randint(1, 5))]),
            RerankRequest(question=random_text(rng), anchor_text=random_text(rng),
                          answer_text=random_text(rng)),
            RerankResponse(score=rng.random()),
            NerRequest(tokens=random_text(rng).split()),
            NerResponse(spans=[WireSpan(token_start=0, token_end=1, entity_type="LOC")]),
        ]
        for message in messages:
            assert type(message).model_validate_json(message.model_dump_json()) == message


def test_anchor_invariant_rejects_late_anchor():
    request = AnchorRequest(encoding="x", n=10, answer_index=5)
    with pytest.raises(ProtocolViolation, match="anchors must precede"):
        check_anchor_response(AnchorResponse(anchor_index=7), request)
    with pytest.raises(ProtocolViolation):
        check_anchor_response(AnchorResponse(anchor_index=5), request)
    with pytest.raises(ProtocolViolation):
        check_anchor_response(AnchorResponse(anchor_index=0), request)
    assert check_anchor_response(AnchorResponse(anchor_index=4), request).anchor_index == 4


def test_anchor_invariant_checks_score_length():
    request = AnchorRequest(encoding="x", n=3, answer_index=3)
    with pytest.raises(ProtocolViolation, match="scores"):
        check_anchor_response(AnchorResponse(anchor_index=1, scores=[0.5]), request)
    ok = check_anchor_response(
        AnchorResponse(anchor_index=1, scores=[0.1, 0.2, 0.7]), request
    )
    assert ok.scores == [0.1, 0.2, 0.7]


def test_generate_invariants():
    request = GenerateRequest(prompt="p", num_samples=2)
    check_generate_response(GenerateResponse(questions=["a?", "b?"]), request)
    with pytest.raises(ProtocolViolation, match="exceed num_samples"):
        check_generate_response(GenerateResponse(questions=["a?", "b?", "c?"]), request)
    with pytest.raises(ProtocolViolation, match="empty"):
        check_generate_response(GenerateResponse(questions=["a?", "  "]), request)
    with pytest.raises(ProtocolViolation, match="no questions"):
        check_generate_response(GenerateResponse(questions=[]), request)


def test_rerank_score_bounds():
    request = RerankRequest(question="q", anchor_text="a", answer_text="b")
    with pytest.raises(ProtocolViolation, match="outside"):
        check_rerank_response(RerankResponse(score=1.3), request)
    with pytest.raises(ProtocolViolation):
        check_rerank_response(RerankResponse(score=-0.1), request)
    check_rerank_response(RerankResponse(score=0.0), request)
    check_rerank_response(RerankResponse(score=1.0), request)


def test_ner_span_invariants():
    request = NerRequest(tokens=["a", "b", "c"])
    check_ner_response(
        NerResponse(spans=[WireSpan(token_start=0, token_end=1, entity_type="ORG")]),
        request,
    )
    with pytest.raises(ProtocolViolation, match="exceeds"):
        check_ner_response(
            NerResponse(spans=[WireSpan(token_start=2, token_end=3, entity_type="ORG")]),
            request,
        )
    with pytest.raises(ProtocolViolation, match="overlap"):
        check_ner_response(
            NerResponse(
                spans=[
                    WireSpan(token_start=0, token_end=1, entity_type="ORG"),
                    WireSpan(token_start=1, token_end=2, entity_type="LOC"),
                ]
            ),
            request,
        )


PROMPT = (
    "[A_START] Rain fell on the northern coast today. [A_END] Crews mobilized. "
    "[SEP] Rain fell on the northern coast today. [SEP] Relief arrived."
)


def test_mock_anchor_is_always_previous_sentence():
    mock = MockBackend(seed=3)
    for answer in (2, 4, 9):
        response = mock.anchor(AnchorRequest(encoding="e", n=10, answer_index=answer))
        assert response.anchor_index == answer - 1


def test_mock_questions_are_templated_from_anchor_prefix():
    mock = MockBackend(seed=1)
    response = mock.generate(GenerateRequest(prompt=PROMPT, num_samples=3))
    assert len(response.questions) == 3
    assert response.questions[0] == "What happened after Rain fell on the northern? (sample 1)"
    assert response.questions[2].endswith("(sample 3)")


def test_mock_same_seed_identical_output():
    a = MockBackend(seed=42).generate(GenerateRequest(prompt=PROMPT, num_samples=10))
    b = MockBackend(seed=42).generate(GenerateRequest(prompt=PROMPT, num_samples=10))
    assert a.questions == b.questions


def test_mock_rerank_scores_in_unit_interval_and_seeded():
    request = RerankRequest(question="What happened?", anchor_text="a", answer_text="b")
    score = MockBackend(seed=5).rerank(request).score
    assert 0.0 <= score <= 1.0
    assert MockBackend(seed=5).rerank(request).score == score


def test_mock_rerank_differs_across_seed_pairs():
    # 100 sampled seed pairs, all verified distinct when this test was
    # constructed; the hash has no reason to collide on these inputs.
    rng = random.Random(123)
    request = RerankRequest(
        question="What happened after the storm?", anchor_text="a", answer_text="b"
    )
    for _ in range(100):
        s1 = rng.randint(0, 10**6)
        s2 = rng.randint(0, 10**6)
        while s2 == s1:
            s2 = rng.randint(0, 10**6)
        assert MockBackend(seed=s1).rerank(request).score != MockBackend(seed=s2).rerank(request).score


def test_mock_is_call_order_independent():
    mock = MockBackend(seed=9)
    gen_request = GenerateRequest(prompt=PROMPT, num_samples=2)
    rer_request = RerankRequest(question="q?", anchor_text="a", answer_text="b")
    first = (mock.generate(gen_request).questions, mock.rerank(rer_request).score)
    mock.anchor(AnchorRequest(encoding="e", n=4, answer_index=3))
    mock.ner(NerRequest(tokens=["x"]))
    second = (mock.generate(gen_request).questions, mock.rerank(rer_request).score)
    assert first == second


def test_mock_ner_returns_no_spans_and_health_reports_ids():
    mock = MockBackend(seed=0)
    assert mock.ner(NerRequest(tokens=["a", "b"])).spans == []
    health = mock.health()
    assert health.status == "ok"
    assert set(health.model_ids) == {"anchor", "generate", "rerank", "ner"}
