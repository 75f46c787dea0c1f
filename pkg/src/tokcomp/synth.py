"""Synthetic sentence-compression corpora for desk-scale checks.

Labels follow a deletion rule the models must learn from features:
stopwords are deleted, content words retained, a token right after
"not" is always retained, and (optionally) the label flips for tokens a
fixed distance after the marker "flip". The long-range rule sits inside
the full U-Net's receptive field but outside the plain conv stack's,
which is what makes the ablation comparison meaningful without the
real corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SEQ_LEN, TokenizedExample, pad_truncate
from .features import EmbeddingTable, GloveFeatures

STOPWORDS = ["the", "of", "a", "in", "to", "and", "for", "on", "at", "by"]
NEGATION = "not"
FLIP_MARKER = "flip"
FLIP_DISTANCE = 7


@dataclass
class SynthConfig:
    n_examples: int = 1000
    vocab_content: int = 200
    min_len: int = 8
    max_len: int = 40
    embed_dim: int = 64
    stopword_rate: float = 0.35
    negation_rate: float = 0.04
    flip_rate: float = 0.0          # share of positions carrying the marker
    label_noise: float = 0.0
    seed: int = 0


def make_vocab(cfg: SynthConfig) -> list[str]:
    words = [f"w{i:03d}" for i in range(cfg.vocab_content)]
    return STOPWORDS + [NEGATION, FLIP_MARKER] + words


def make_embeddings(cfg: SynthConfig) -> EmbeddingTable:
    rng = np.random.default_rng(cfg.seed + 1)
    table = EmbeddingTable(dim=cfg.embed_dim)
    for word in make_vocab(cfg):
        table.vectors[word] = rng.normal(0, 1, cfg.embed_dim).astype(np.float32)
    return table


def label_tokens(tokens: list[str]) -> np.ndarray:
    labels = np.ones(len(tokens), dtype=np.int64)
    for t, tok in enumerate(tokens):
        if tok in STOPWORDS or tok == FLIP_MARKER:
            labels[t] = 0
        if t > 0 and tokens[t - 1] == NEGATION:
            labels[t] = 1
        if t >= FLIP_DISTANCE and tokens[t - FLIP_DISTANCE] == FLIP_MARKER:
            labels[t] = 1 - labels[t]
    return labels


def make_corpus(cfg: SynthConfig) -> tuple[list[TokenizedExample], GloveFeatures]:
    """Padded examples plus a matching feature provider."""
    rng = np.random.default_rng(cfg.seed)
    content = [f"w{i:03d}" for i in range(cfg.vocab_content)]
    examples: list[TokenizedExample] = []
    for idx in range(cfg.n_examples):
        n = int(rng.integers(cfg.min_len, cfg.max_len + 1))
        tokens: list[str] = []
        for _ in range(n):
            r = rng.random()
            if r < cfg.stopword_rate:
                tokens.append(STOPWORDS[int(rng.integers(len(STOPWORDS)))])
            elif r < cfg.stopword_rate + cfg.negation_rate:
                tokens.append(NEGATION)
            elif r < cfg.stopword_rate + cfg.negation_rate + cfg.flip_rate:
                tokens.append(FLIP_MARKER)
            else:
                tokens.append(content[int(rng.integers(len(content)))])
        labels = label_tokens(tokens)
        if cfg.label_noise > 0:
            noise = rng.random(n) < cfg.label_noise
            labels = np.where(noise, 1 - labels, labels)
        if labels.sum() == 0:
            labels[int(rng.integers(n))] = 1
        ex = TokenizedExample(
            tokens=tokens,
            labels=labels,
            pad_mask=np.ones(n, dtype=np.int64),
            original_length=n,
            id=str(idx),
            source=" ".join(tokens),
        )
        examples.append(pad_truncate(ex, SEQ_LEN))
    return examples, GloveFeatures(make_embeddings(cfg))


def make_splits(cfg: SynthConfig, n_test: int = 200,
                n_val: int = 200) -> tuple[dict[str, list[TokenizedExample]], GloveFeatures]:
    examples, features = make_corpus(cfg)
    return {
        "test": examples[:n_test],
        "validation": examples[n_test:n_test + n_val],
        "train": examples[n_test + n_val:],
    }, features
