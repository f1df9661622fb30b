"""Serving logic for the four model kinds.

Clients send marker-annotated plain text; this side owns tokenization,
window checks, truncation, and resolving span predictions back to
sentence indices.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass

import torch

from qud_model_server.bundle import A_END, A_START, SEP, SOS

_SOS_MARKER = re.compile(r"\[sos\] (\d+) ?")
_WS_RUN = re.compile(r"\s+")

_VERY_LARGE = 10**8


class ContextTooLong(Exception):
    """Input exceeds the model window; carries the measured token count."""

    def __init__(self, measured: int, window: int, where: str):
        self.measured = measured
        self.window = window
        super().__init__(
            f"{where}: {measured} tokens exceed the {window}-token model window"
        )


class MalformedInput(Exception):
    """The rendered input does not follow the expected marker layout."""


def normalize_ws(text: str) -> str:
    return _WS_RUN.sub(" ", text.strip())


def model_window(model, tokenizer) -> int:
    for attr in ("max_position_embeddings", "n_positions"):
        value = getattr(model.config, attr, None)
        if isinstance(value, int) and 0 < value < _VERY_LARGE:
            return value
    value = getattr(tokenizer, "model_max_length", None)
    if isinstance(value, int) and 0 < value < _VERY_LARGE:
        return value
    return _VERY_LARGE


def parse_anchor_encoding(text: str) -> tuple[str, list[tuple[int, str]]]:
    """Split '[CLS] answer [SEP] [sos] 1 s1 [sos] 2 s2 ...' into the answer
    text and the (sentence id, sentence text) list."""
    if not text.startswith("[CLS] "):
        raise MalformedInput("anchor encoding must start with '[CLS] '")
    try:
        answer_part, document_part = text[len("[CLS] "):].split(" [SEP] ", 1)
    except ValueError:
        raise MalformedInput("anchor encoding lacks the '[SEP]' delimiter")
    sentences: list[tuple[int, str]] = []
    matches = list(_SOS_MARKER.finditer(document_part))
    if not matches:
        raise MalformedInput("anchor encoding lists no '[sos] <id>' markers")
    for k, match in enumerate(matches):
        end = matches[k + 1].start() if k + 1 < len(matches) else len(document_part)
        sentences.append((int(match.group(1)), document_part[match.end():end].strip()))
    return answer_part, sentences


def parse_generation_prompt(text: str) -> tuple[str, str, str]:
    parts = text.split(f" {SEP} ")
    if len(parts) < 3:
        raise MalformedInput(
            f"generation prompt must have context {SEP} anchor {SEP} answer"
        )
    return parts[0], parts[1], " ".join(parts[2:])


@dataclass
class AnchorPrediction:
    anchor_index: int
    scores: list[float]
    notes: list[str]


class AnchorSpanPredictor:
    """Scores the '[sos] <id>' marker pair of every sentence and returns
    the best-scoring sentence strictly before the answer."""

    def __init__(self, tokenizer, model, device: str):
        self.tokenizer = tokenizer
        self.model = model
        self.device = device

    def predict(self, encoding_text: str, n: int, answer_index: int) -> AnchorPrediction:
        tok = self.tokenizer
        answer_text, sentences = parse_anchor_encoding(encoding_text)
        if len(sentences) != n:
            raise MalformedInput(
                f"encoding lists {len(sentences)} sentences but n={n}"
            )
        ids = [tok.cls_token_id] + tok(answer_text, add_special_tokens=False)["input_ids"]
        ids.append(tok.sep_token_id)
        sos_id = tok.convert_tokens_to_ids(SOS)
        marker_pos: dict[int, tuple[int, int]] = {}
        pos_to_sentence: list[tuple[int, int]] = []
        for sent_id, sent_text in sentences:
            start = len(ids)
            ids.append(sos_id)
            id_tokens = tok(str(sent_id), add_special_tokens=False)["input_ids"]
            ids.extend(id_tokens)
            marker_pos[sent_id] = (start, start + len(id_tokens))
            ids.extend(tok(sent_text, add_special_tokens=False)["input_ids"])
            pos_to_sentence.append((start, sent_id))
        ids.append(tok.sep_token_id)

        window = model_window(self.model, tok)
        if len(ids) > window:
            raise ContextTooLong(len(ids), window, "/anchor")

        with torch.no_grad():
            output = self.model(torch.tensor([ids], device=self.device))
        start_logits = output.start_logits[0]
        end_logits = output.end_logits[0]

        scores = []
        for sent_id, _ in sentences:
            start, end = marker_pos[sent_id]
            scores.append(float(start_logits[start] + end_logits[end]))
        legal = [
            (score, sent_id)
            for (sent_id, _), score in zip(sentences, scores)
            if 1 <= sent_id < answer_index
        ]
        if not legal:
            raise MalformedInput(
                f"no sentence precedes answer_index={answer_index}"
            )
        anchor_index = max(legal, key=lambda pair: pair[0])[1]

        notes = []

        def sentence_of(position: int) -> int:
            owner = pos_to_sentence[0][1]
            for start, sent_id in pos_to_sentence:
                if position >= start:
                    owner = sent_id
            return owner

        raw_start = sentence_of(int(start_logits.argmax()))
        raw_end = sentence_of(int(end_logits.argmax()))
        if raw_start != raw_end:
            notes.append(
                f"span endpoints straddle sentences {raw_start} and {raw_end}; "
                "used the start token's sentence scoring"
            )
        return AnchorPrediction(anchor_index=anchor_index, scores=scores, notes=notes)


@dataclass
class SampledQuestions:
    questions: list[str]
    notes: list[str]


class QuestionSampler:
    """Nucleus sampling over a causal LM fine-tuned on the four-part
    layout; the question is whatever follows the final delimiter."""

    def __init__(self, tokenizer, model, device: str, max_new_tokens: int = 48):
        self.tokenizer = tokenizer
        self.model = model
        self.device = device
        self.max_new_tokens = max_new_tokens
        self._sampling_lock = threading.Lock()

    def _banned_ids(self) -> list[list[int]]:
        banned = {self.tokenizer.convert_tokens_to_ids(t)
                  for t in self.tokenizer.all_special_tokens}
        eos = self.tokenizer.eos_token_id
        banned.discard(None)
        banned.discard(eos)
        return [[token_id] for token_id in banned]

    def sample(self, prompt_text: str, num_samples: int, top_p: float,
               seed: int) -> SampledQuestions:
        tok = self.tokenizer
        context, anchor, answer = parse_generation_prompt(prompt_text)
        sep_id = tok.convert_tokens_to_ids(SEP)

        def encode(text: str) -> list[int]:
            return tok(text, add_special_tokens=False)["input_ids"]

        context_ids = encode(context)
        anchor_ids = encode(anchor)
        answer_ids = encode(answer)
        window = model_window(self.model, tok)
        budget = window - self.max_new_tokens
        fixed = len(anchor_ids) + len(answer_ids) + 3  # three delimiters
        if fixed > budget:
            raise ContextTooLong(fixed, budget, "/generate")

        notes = []
        room_for_context = budget - fixed
        if len(context_ids) > room_for_context:
            # Drop earliest material first, but never the anchor span: tokens
            # before [A_START] go first, then tokens after [A_END].
            a_start_id = tok.convert_tokens_to_ids(A_START)
            a_end_id = tok.convert_tokens_to_ids(A_END)
            anchor_from = context_ids.index(a_start_id) if a_start_id in context_ids else 0
            overflow = len(context_ids) - room_for_context
            drop_front = min(overflow, anchor_from)
            context_ids = context_ids[drop_front:]
            overflow -= drop_front
            if overflow > 0:
                anchor_upto = (
                    context_ids.index(a_end_id) + 1 if a_end_id in context_ids
                    else len(context_ids)
                )
                tail = context_ids[anchor_upto:]
                if overflow > len(tail):
                    raise ContextTooLong(
                        len(context_ids) + fixed, budget, "/generate"
                    )
                context_ids = context_ids[:anchor_upto] + tail[overflow:]
            notes.append(
                f"context truncated to {len(context_ids)} tokens "
                "(earliest material dropped, anchor span kept)"
            )

        ids = context_ids + [sep_id] + anchor_ids + [sep_id] + answer_ids + [sep_id]
        inputs = torch.tensor([ids], device=self.device)
        pad_id = tok.pad_token_id if tok.pad_token_id is not None else sep_id
        with self._sampling_lock:
            torch.manual_seed(seed)
            with torch.no_grad():
                sequences = self.model.generate(
                    inputs,
                    do_sample=True,
                    top_p=top_p,
                    num_return_sequences=num_samples,
                    max_new_tokens=self.max_new_tokens,
                    min_new_tokens=2,
                    pad_token_id=pad_id,
                    bad_words_ids=self._banned_ids() or None,
                )
        questions = []
        for row in sequences:
            text = tok.decode(row[len(ids):], skip_special_tokens=True).strip()
            if not text:
                text = "?"
                notes.append("empty sample replaced with placeholder")
            questions.append(normalize_ws(text))
        return SampledQuestions(questions=questions, notes=notes)


class PairReranker:
    """Binary classifier over (question, anchor + answer); returns the
    positive-class posterior.  Inputs are whitespace-normalized first so
    formatting differences cannot move the score."""

    def __init__(self, tokenizer, model, device: str, positive_index: int = 1):
        self.tokenizer = tokenizer
        self.model = model
        self.device = device
        self.positive_index = positive_index

    def score(self, question: str, anchor_text: str, answer_text: str) -> float:
        question = normalize_ws(question)
        pair = normalize_ws(anchor_text) + " " + normalize_ws(answer_text)
        encoded = self.tokenizer(question, pair, return_tensors="pt")
        window = model_window(self.model, self.tokenizer)
        length = encoded["input_ids"].shape[1]
        if length > window:
            raise ContextTooLong(int(length), window, "/rerank")
        with torch.no_grad():
            logits = self.model(
                **{k: v.to(self.device) for k, v in encoded.items()}
            ).logits[0]
        return float(torch.softmax(logits, dim=-1)[self.positive_index])


def bio_to_spans(labels: list[str]) -> list[dict]:
    """Collapse per-word BIO labels into inclusive token spans.  A B- tag
    opens a span; an I- tag extends the current span of the same type and
    otherwise opens one; O closes."""
    spans: list[dict] = []
    current: "dict | None" = None
    for word_id, label in enumerate(labels):
        if label == "O" or not label:
            current = None
            continue
        begins = label.startswith("B-")
        entity_type = label.split("-", 1)[-1]
        if current is not None and not begins and current["entity_type"] == entity_type:
            current["token_end"] = word_id
            continue
        current = {
            "token_start": word_id,
            "token_end": word_id,
            "entity_type": entity_type,
        }
        spans.append(current)
    return spans


class TokenTagger:
    """Per-token entity tagging with first-subtoken aggregation; adjacent
    same-type tokens merge into one span."""

    def __init__(self, tokenizer, model, device: str):
        self.tokenizer = tokenizer
        self.model = model
        self.device = device

    def tag(self, tokens: list[str]) -> list[dict]:
        if not tokens:
            return []
        encoded = self.tokenizer(tokens, is_split_into_words=True, return_tensors="pt")
        window = model_window(self.model, self.tokenizer)
        if encoded["input_ids"].shape[1] > window:
            raise ContextTooLong(int(encoded["input_ids"].shape[1]), window, "/ner")
        with torch.no_grad():
            logits = self.model(
                **{k: v.to(self.device) for k, v in encoded.items()}
            ).logits[0]
        predictions = logits.argmax(dim=-1).tolist()
        id2label = self.model.config.id2label
        word_labels: dict[int, str] = {}
        for position, word_id in enumerate(encoded.word_ids()):
            if word_id is None or word_id in word_labels:
                continue
            word_labels[word_id] = id2label[predictions[position]]
        return bio_to_spans([word_labels.get(w, "O") for w in range(len(tokens))])
