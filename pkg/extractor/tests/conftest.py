"""Shared fixtures: a tiny randomly initialized encoder with a wordpiece
vocabulary built for the test sentences, saved to a local directory."""

from __future__ import annotations

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizer

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "on", "not", "cat", "dog", "sat", "mat", "ran",
    "run", "##s", "##ning", "jump", "##ed", "big", "red", ".",
]

HIDDEN = 64
LAYERS = 4


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("tiny-encoder")
    tokenizer = BertTokenizer(vocab={t: i for i, t in enumerate(VOCAB)},
                              do_lower_case=True)
    tokenizer.save_pretrained(path)
    config = BertConfig(vocab_size=len(VOCAB), hidden_size=HIDDEN,
                        num_hidden_layers=LAYERS, num_attention_heads=4,
                        intermediate_size=2 * HIDDEN,
                        max_position_embeddings=64)
    torch.manual_seed(0)
    BertModel(config).save_pretrained(path)
    return str(path)


def write_tsv(path, sentences):
    """Each sentence is a token list; labels are all ones (unused here)."""
    with open(path, "w") as f:
        for tokens in sentences:
            f.write(" ".join(tokens) + "\t" + " ".join("1" for _ in tokens) + "\n")
    return str(path)
