"""Model bundle configuration and checkpoint loading.

Each of the four endpoints is backed by one checkpoint (a local path or a
hub id).  A missing or unloadable checkpoint degrades only its endpoint:
/health reports the gap and the endpoint answers with a typed
"model unavailable" error instead of failing the whole service.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

ENDPOINTS = ("anchor", "generate", "rerank", "ner")

# Marker literals used by clients inside rendered inputs.  They are added
# to each tokenizer as special tokens when absent, so the marker string is
# itself the model-specific token; /health exposes the resulting mapping.
SOS = "[sos]"
A_START = "[A_START]"
A_END = "[A_END]"
SEP = "[SEP]"
CLS = "[CLS]"


@dataclass
class ModelBundle:
    """Checkpoint identifiers and decoding defaults."""

    anchor_model: "str | None" = None
    generator_model: "str | None" = None
    reranker_model: "str | None" = None
    ner_model: "str | None" = None
    device: str = "cpu"
    top_p: float = 0.9
    max_samples: int = 64
    max_new_tokens: int = 48
    seed: int = 0
    positive_label_index: int = 1
    quality_unverified: bool = False

    @classmethod
    def from_env(cls) -> "ModelBundle":
        def flag(name: str) -> bool:
            return os.environ.get(name, "").lower() in ("1", "true", "yes")

        return cls(
            anchor_model=os.environ.get("QUD_ANCHOR_MODEL"),
            generator_model=os.environ.get("QUD_GENERATOR_MODEL"),
            reranker_model=os.environ.get("QUD_RERANKER_MODEL"),
            ner_model=os.environ.get("QUD_NER_MODEL"),
            device=os.environ.get("QUD_DEVICE", "cpu"),
            top_p=float(os.environ.get("QUD_TOP_P", "0.9")),
            max_samples=int(os.environ.get("QUD_MAX_SAMPLES", "64")),
            max_new_tokens=int(os.environ.get("QUD_MAX_NEW_TOKENS", "48")),
            seed=int(os.environ.get("QUD_SEED", "0")),
            quality_unverified=flag("QUD_QUALITY_UNVERIFIED"),
        )


@dataclass
class LoadedModels:
    """Live model handles, read-only after load."""

    bundle: ModelBundle
    anchor: "object | None" = None
    generator: "object | None" = None
    reranker: "object | None" = None
    ner: "object | None" = None
    model_ids: dict = field(default_factory=dict)
    special_tokens: dict = field(default_factory=dict)
    problems: dict = field(default_factory=dict)

    @property
    def degraded(self) -> bool:
        return not all((self.anchor, self.generator, self.reranker, self.ner))

    def handle_for(self, endpoint: str):
        return {"anchor": self.anchor, "generate": self.generator,
                "rerank": self.reranker, "ner": self.ner}[endpoint]


def _ensure_markers(tokenizer, model, markers: list[str]) -> dict:
    """Add marker literals as special tokens when the tokenizer lacks
    them; returns {marker: token id}."""
    known = set(tokenizer.all_special_tokens)
    missing = [m for m in markers if m not in known
               and tokenizer.convert_tokens_to_ids(m) in (None, tokenizer.unk_token_id)]
    if missing:
        tokenizer.add_special_tokens({"additional_special_tokens": missing},
                                     replace_additional_special_tokens=False)
        model.resize_token_embeddings(len(tokenizer))
    return {m: tokenizer.convert_tokens_to_ids(m) for m in markers}


def load_models(bundle: ModelBundle) -> LoadedModels:
    """Load every configured checkpoint; failures degrade their endpoint."""
    import torch  # local import keeps --help fast

    from qud_model_server.modeling import (
        AnchorSpanPredictor,
        PairReranker,
        QuestionSampler,
        TokenTagger,
    )

    torch.manual_seed(bundle.seed)
    loaded = LoadedModels(bundle=bundle)
    loaded.model_ids = {name: "unavailable" for name in ENDPOINTS}

    def attempt(endpoint: str, model_id: "str | None", build):
        if not model_id:
            loaded.problems[endpoint] = "no checkpoint configured"
            return None
        try:
            handle = build(model_id)
        except Exception as exc:
            log.warning("failed to load %s model %r: %s", endpoint, model_id, exc)
            loaded.problems[endpoint] = f"load failed: {exc}"
            return None
        loaded.model_ids[endpoint] = model_id
        return handle

    from transformers import (
        AutoModelForCausalLM,
        AutoModelForQuestionAnswering,
        AutoModelForSequenceClassification,
        AutoModelForTokenClassification,
        AutoTokenizer,
    )

    def build_anchor(model_id):
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForQuestionAnswering.from_pretrained(model_id)
        mapping = _ensure_markers(tokenizer, model, [SOS])
        loaded.special_tokens["anchor"] = mapping
        model.to(bundle.device).eval()
        return AnchorSpanPredictor(tokenizer, model, bundle.device)

    def build_generator(model_id):
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForCausalLM.from_pretrained(model_id)
        mapping = _ensure_markers(tokenizer, model, [A_START, A_END, SEP])
        loaded.special_tokens["generate"] = mapping
        model.to(bundle.device).eval()
        return QuestionSampler(tokenizer, model, bundle.device,
                               max_new_tokens=bundle.max_new_tokens)

    def build_reranker(model_id):
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForSequenceClassification.from_pretrained(model_id)
        model.to(bundle.device).eval()
        return PairReranker(tokenizer, model, bundle.device,
                            positive_index=bundle.positive_label_index)

    def build_ner(model_id):
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModelForTokenClassification.from_pretrained(model_id)
        model.to(bundle.device).eval()
        return TokenTagger(tokenizer, model, bundle.device)

    loaded.anchor = attempt("anchor", bundle.anchor_model, build_anchor)
    loaded.generator = attempt("generate", bundle.generator_model, build_generator)
    loaded.reranker = attempt("rerank", bundle.reranker_model, build_reranker)
    loaded.ner = attempt("ner", bundle.ner_model, build_ner)
    return loaded
