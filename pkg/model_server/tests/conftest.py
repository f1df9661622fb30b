"""Session fixtures: tiny random-weight checkpoints exercising the real
load-serve path without any network or large downloads."""

import pytest
import torch
from tokenizers import Tokenizer, models as token_models, pre_tokenizers
from transformers import (
    BertConfig,
    BertForQuestionAnswering,
    BertForSequenceClassification,
    BertForTokenClassification,
    GPT2Config,
    GPT2LMHeadModel,
    PreTrainedTokenizerFast,
)

from qud_model_server.bundle import ModelBundle, load_models

VOCAB_WORDS = [
    "sentence", "Sentence", "number", "talks", "about", "topic", "reports",
    "development", "covers", "event", "here", "mentions", "item", "what",
    "why", "how", "did", "happened", "after", "the", "a", "storm", "relief",
    "crews", "aid", "made", "landfall", "overnight", "cleared", "roads",
    "by", "morning", "Hurricane", "Hugo", "hit", "South", "Carolina", "in",
    "September", ".", "?", ",",
] + [str(i) for i in range(0, 41)]

CONLL_LABELS = {
    0: "O", 1: "B-PER", 2: "I-PER", 3: "B-ORG", 4: "I-ORG",
    5: "B-LOC", 6: "I-LOC", 7: "B-MISC", 8: "I-MISC",
}


def build_tokenizer(directory):
    vocab = {"[PAD]": 0, "[UNK]": 1, "[CLS]": 2, "[SEP]": 3, "[MASK]": 4}
    for word in VOCAB_WORDS:
        vocab.setdefault(word, len(vocab))
    core = Tokenizer(token_models.WordLevel(vocab, unk_token="[UNK]"))
    core.pre_tokenizer = pre_tokenizers.Whitespace()
    fast = PreTrainedTokenizerFast(
        tokenizer_object=core,
        unk_token="[UNK]", pad_token="[PAD]", cls_token="[CLS]",
        sep_token="[SEP]", mask_token="[MASK]",
        additional_special_tokens=["[sos]", "[A_START]", "[A_END]"],
    )
    fast.save_pretrained(directory)
    return fast


def tiny_bert_config(vocab_size, **overrides):
    base = dict(
        vocab_size=vocab_size, hidden_size=32, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=64,
        max_position_embeddings=256,
    )
    base.update(overrides)
    return BertConfig(**base)


@pytest.fixture(scope="session")
def checkpoints(tmp_path_factory):
    torch.manual_seed(20240201)
    root = tmp_path_factory.mktemp("checkpoints")
    paths = {name: root / name for name in ("anchor", "generator", "reranker", "ner")}
    for path in paths.values():
        path.mkdir()
        build_tokenizer(path)
    tokenizer = build_tokenizer(root / "probe")
    vocab_size = len(tokenizer)

    BertForQuestionAnswering(tiny_bert_config(vocab_size)).save_pretrained(paths["anchor"])
    gpt2 = GPT2LMHeadModel(GPT2Config(
        vocab_size=vocab_size, n_positions=128, n_embd=32, n_layer=2, n_head=2,
        bos_token_id=tokenizer.cls_token_id, eos_token_id=tokenizer.sep_token_id,
        pad_token_id=tokenizer.pad_token_id,
    ))
    gpt2.save_pretrained(paths["generator"])
    BertForSequenceClassification(
        tiny_bert_config(vocab_size, num_labels=2)
    ).save_pretrained(paths["reranker"])
    BertForTokenClassification(
        tiny_bert_config(
            vocab_size, num_labels=len(CONLL_LABELS),
            id2label=CONLL_LABELS,
            label2id={v: k for k, v in CONLL_LABELS.items()},
        )
    ).save_pretrained(paths["ner"])
    return {name: str(path) for name, path in paths.items()}


@pytest.fixture(scope="session")
def full_bundle(checkpoints):
    return ModelBundle(
        anchor_model=checkpoints["anchor"],
        generator_model=checkpoints["generator"],
        reranker_model=checkpoints["reranker"],
        ner_model=checkpoints["ner"],
        seed=11,
    )


@pytest.fixture(scope="session")
def loaded(full_bundle):
    return load_models(full_bundle)
