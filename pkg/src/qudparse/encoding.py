"""Model-input renderings for anchor prediction and question generation.

Outputs are marker-annotated plain text, byte-stable across runs; subword
tokenization and truncation are the serving layer's concern.  Marker
literals are fixed here (``[CLS]``, ``[SEP]``, ``[sos]``, ``[A_START]``,
``[A_END]``) and servers map them onto model-specific special tokens.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from qudparse.core import Document, Sentence

CLS = "[CLS]"
SEP = "[SEP]"
SOS = "[sos]"
ANCHOR_START = "[A_START]"
ANCHOR_END = "[A_END]"


@dataclass(frozen=True)
class AnchorQueryEncoding:
    """Anchor-query rendering plus the character span of each sentence's
    ``[sos] <id>`` marker pair (half-open spans)."""

    text: str
    sentence_marker_offsets: Mapping[int, tuple[int, int]]


@dataclass(frozen=True)
class EntitySpan:
    """A named-entity token span, inclusive and 0-based over Sentence.tokens."""

    sentence_index: int
    token_start: int
    token_end: int
    entity_type: str

    def __post_init__(self) -> None:
        if self.token_start < 0:
            raise ValueError(f"token_start must be >= 0, got {self.token_start}")
        if self.token_end < self.token_start:
            raise ValueError(
                f"token_end {self.token_end} precedes token_start {self.token_start}"
            )
        if not self.entity_type:
            raise ValueError("entity_type must be non-empty")


@dataclass(frozen=True)
class GenerationPrompt:
    """Four-part question-generation input.

    The context part covers sentences 1..i-1 with the anchor sentence
    wrapped in anchor markers; the anchor also appears unwrapped as its
    own part; the answer part is entity-masked.  The question part is
    present only when building training instances.
    """

    context_part: str
    anchor_part: str
    answer_part: str
    question_part: "str | None" = None

    def __post_init__(self) -> None:
        if self.anchor_part not in self.context_part:
            raise ValueError("anchor sentence must appear verbatim in the context part")

    def render(self) -> str:
        parts = [self.context_part, self.anchor_part, self.answer_part]
        if self.question_part is not None:
            parts.append(self.question_part)
        return f" {SEP} ".join(parts)


def encode_anchor_query(doc: Document, answer_index: int) -> AnchorQueryEncoding:
    """Render ``[CLS] <answer> [SEP]`` followed by every sentence of the
    document, each prefixed by its ``[sos] <id>`` marker pair.

    The sentence IDs are decimal integers; marker offsets are recorded so
    a span over the marker pair resolves to a sentence index.
    """
    if not 2 <= answer_index <= doc.n:
        raise ValueError(
            f"answer_index must be in 2..{doc.n}, got {answer_index} "
            "(sentence 1 is the root and has no anchor)"
        )
    pieces = [CLS, doc.sentence(answer_index).text, SEP]
    offsets: dict[int, tuple[int, int]] = {}
    cursor = len(" ".join(pieces))
    for sent in doc.sentences:
        marker = f"{SOS} {sent.index}"
        start = cursor + 1  # the joining space
        offsets[sent.index] = (start, start + len(marker))
        pieces.append(marker)
        pieces.append(sent.text)
        cursor = start + len(marker) + 1 + len(sent.text)
    return AnchorQueryEncoding(text=" ".join(pieces), sentence_marker_offsets=offsets)


def mask_entities(sentence: Sentence, spans: Iterable[EntitySpan]) -> str:
    """Replace each token inside a named-entity span with the span's type
    label, one label token per original token; token count is preserved.
    """
    tokens = list(sentence.tokens)
    claimed = [False] * len(tokens)
    for span in spans:
        if span.token_end >= len(tokens):
            raise ValueError(
                f"span {span.token_start}..{span.token_end} exceeds token count "
                f"{len(tokens)} in sentence {sentence.index}"
            )
        for position in range(span.token_start, span.token_end + 1):
            if claimed[position]:
                raise ValueError(
                    f"overlapping entity spans at token {position} in sentence "
                    f"{sentence.index}"
                )
            claimed[position] = True
            tokens[position] = span.entity_type
    return " ".join(tokens)


def encode_generation_prompt(
    doc: Document,
    answer_index: int,
    anchor_index: int,
    spans: Iterable[EntitySpan] = (),
    question: "str | None" = None,
) -> GenerationPrompt:
    """Build the four-part generation input for one (anchor, answer) pair.

    Context is sentences 1..answer_index-1 with the anchor wrapped in
    anchor markers; the answer part is the entity-masked answer sentence.
    """
    if not 2 <= answer_index <= doc.n:
        raise ValueError(f"answer_index must be in 2..{doc.n}, got {answer_index}")
    if not 1 <= anchor_index < answer_index:
        raise ValueError(
            f"anchor_index must be in 1..{answer_index - 1}, got {anchor_index}"
        )
    context_pieces = []
    for sent in doc.sentences[: answer_index - 1]:
        if sent.index == anchor_index:
            context_pieces.append(f"{ANCHOR_START} {sent.text} {ANCHOR_END}")
        else:
            context_pieces.append(sent.text)
    return GenerationPrompt(
        context_part=" ".join(context_pieces),
        anchor_part=doc.sentence(anchor_index).text,
        answer_part=mask_entities(doc.sentence(answer_index), spans),
        question_part=question,
    )
