"""Dataset ingestion: labeled TSV and original/compressed JSON pairs,
retention-mask derivation, tokenization, padding to the fixed length 64,
and the first-1000 / next-1000 / remainder splits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, EmptyDatasetError, ParseError

SEQ_LEN = 64
PAD_TOKEN = "<PAD>"
_TERMINAL_PUNCT = set(".,!?;:")


@dataclass
class RawPair:
    original: str
    compressed: str
    id: str


@dataclass
class TokenizedExample:
    tokens: list[str]                 # real tokens only, length <= 64
    labels: np.ndarray                # int mask, 1 = retain
    pad_mask: np.ndarray              # 1 at real-token positions
    original_length: int
    id: str = ""
    source: str = ""
    truncated: bool = False


@dataclass
class DatasetStats:
    skipped_alignment: int = 0
    skipped_degenerate: int = 0
    truncated: int = 0


def tokenize(text: str) -> list[str]:
    """Whitespace split with terminal punctuation peeled into own tokens."""
    out: list[str] = []
    for chunk in text.split():
        tail: list[str] = []
        while len(chunk) > 1 and chunk[-1] in _TERMINAL_PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        out.append(chunk)
        out.extend(reversed(tail))
    return out


def load_dataset(path, format: str = "tsv_labeled"):
    """Parse a dataset file, preserving record order.

    ``tsv_labeled`` yields TokenizedExample (unpadded); ``pairs_json``
    yields RawPair. Raises ParseError with the offending line number.
    """
    try:
        if format == "tsv_labeled":
            return _load_tsv(path)
        if format == "pairs_json":
            return _load_pairs(path)
    except OSError as e:
        raise ParseError(f"cannot read dataset: {e}") from e
    raise ParseError(f"unknown dataset format {format!r}")


def _load_tsv(path) -> list[TokenizedExample]:
    records: list[TokenizedExample] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected 'tokens<TAB>labels'", line=lineno)
            tokens = parts[0].split()
            try:
                labels = [int(v) for v in parts[1].split()]
            except ValueError:
                raise ParseError("labels must be integers", line=lineno) from None
            if len(tokens) != len(labels):
                raise ParseError(
                    f"{len(tokens)} tokens vs {len(labels)} labels", line=lineno)
            if any(v not in (0, 1) for v in labels):
                raise ParseError("labels must be 0 or 1", line=lineno)
            if not tokens:
                raise ParseError("empty example", line=lineno)
            records.append(TokenizedExample(
                tokens=tokens,
                labels=np.array(labels, dtype=np.int64),
                pad_mask=np.ones(len(tokens), dtype=np.int64),
                original_length=len(tokens),
                id=str(len(records)),
                source=parts[0],
            ))
    if not records:
        raise EmptyDatasetError(f"no records in {path}")
    return records


def _load_pairs(path) -> list[RawPair]:
    records: list[RawPair] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"bad JSON: {e.msg}", line=lineno) from None
            try:
                records.append(RawPair(original=obj["original"],
                                       compressed=obj["compressed"],
                                       id=str(obj.get("id", len(records)))))
            except KeyError as e:
                raise ParseError(f"missing field {e}", line=lineno) from None
    if not records:
        raise EmptyDatasetError(f"no records in {path}")
    return records


def derive_mask(pair: RawPair) -> TokenizedExample:
    """Greedy leftmost subsequence alignment of compressed onto original.

    labels[t] = 1 iff original token t is matched. Raises AlignmentError
    when the compressed sentence is not a subsequence of the original.
    """
    orig = tokenize(pair.original)
    comp = tokenize(pair.compressed)
    labels = np.zeros(len(orig), dtype=np.int64)
    j = 0
    for t, tok in enumerate(orig):
        if j < len(comp) and tok == comp[j]:
            labels[t] = 1
            j += 1
    if j != len(comp):
        raise AlignmentError(
            f"pair {pair.id}: compressed text is not a subsequence of the original")
    return TokenizedExample(
        tokens=orig,
        labels=labels,
        pad_mask=np.ones(len(orig), dtype=np.int64),
        original_length=len(orig),
        id=pair.id,
        source=pair.original,
    )


def derive_corpus(pairs: list[RawPair],
                  stats: DatasetStats | None = None) -> list[TokenizedExample]:
    """derive_mask over a corpus; unalignable or degenerate pairs are
    skipped and counted, not raised."""
    stats = stats if stats is not None else DatasetStats()
    out: list[TokenizedExample] = []
    for pair in pairs:
        try:
            ex = derive_mask(pair)
        except AlignmentError:
            stats.skipped_alignment += 1
            continue
        if ex.original_length == 0 or int(ex.labels.sum()) == 0:
            stats.skipped_degenerate += 1
            continue
        out.append(ex)
    return out


def pad_truncate(ex: TokenizedExample, seq_len: int = SEQ_LEN,
                 stats: DatasetStats | None = None) -> TokenizedExample:
    """Fix an example to the model's input length.

    Longer sequences are cut at ``seq_len``; shorter ones padded with
    zeros in labels and pad_mask. Empty examples are degenerate.
    """
    n = len(ex.tokens)
    if n == 0:
        raise EmptyDatasetError(f"example {ex.id}: empty sentence")
    truncated = n > seq_len
    keep = min(n, seq_len)
    labels = np.zeros(seq_len, dtype=np.int64)
    labels[:keep] = ex.labels[:keep]
    pad_mask = np.zeros(seq_len, dtype=np.int64)
    pad_mask[:keep] = 1
    if truncated and stats is not None:
        stats.truncated += 1
    return TokenizedExample(
        tokens=list(ex.tokens[:keep]),
        labels=labels,
        pad_mask=pad_mask,
        original_length=n,
        id=ex.id,
        source=ex.source,
        truncated=truncated,
    )


@dataclass
class SplitSpec:
    """File-order splits: first 1000 test, next 1000 validation, rest train."""
    test_size: int = 1000
    validation_size: int = 1000


def split_dataset(examples: list, spec: SplitSpec | None = None) -> dict[str, list]:
    spec = spec or SplitSpec()
    n_head = spec.test_size + spec.validation_size
    if len(examples) <= n_head:
        raise EmptyDatasetError(
            f"need more than {n_head} examples to split, got {len(examples)}")
    return {
        "test": examples[:spec.test_size],
        "validation": examples[spec.test_size:n_head],
        "train": examples[n_head:],
    }


def compression_text(ex: TokenizedExample) -> str:
    """Join the retained tokens; inverse of derive_mask up to whitespace."""
    return " ".join(tok for tok, lab in zip(ex.tokens, ex.labels) if lab == 1)
