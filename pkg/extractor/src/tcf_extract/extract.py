"""Run a pretrained encoder over a dataset and export token features.

Each whitespace token is expanded into wordpieces; its feature vector
per layer is the first wordpiece's hidden state (or the mean over its
pieces with pool="mean"). The last ``layers`` hidden layers are stored,
deepest first, as one TCF1 record per example. Sentences whose subword
expansion overflows the position budget are cut at the last whole token
that still fits.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .dataset import DatasetExample, load_examples
from .tcf import write_records

SEQ_LEN = 64


class ExtractionError(Exception):
    pass


@dataclass
class ExtractionJob:
    model: str
    data: str
    out: str
    format: str = "tsv_labeled"
    pool: str = "first"
    layers: int = 4
    seq_len: int = SEQ_LEN
    batch_size: int = 16


@dataclass
class ExtractResult:
    written: int = 0
    skipped: list[str] = field(default_factory=list)
    hidden: int = 0


@dataclass
class _Encoded:
    example: DatasetExample
    input_ids: list[int]
    spans: list[tuple[int, int]]   # wordpiece [start, end) per kept token


def _encode(example: DatasetExample, tokenizer, seq_len: int) -> _Encoded:
    """Map tokens to wordpiece spans inside [CLS] ... [SEP], truncating
    at the last whole token that fits. Raises on unalignable tokens."""
    ids = [tokenizer.cls_token_id]
    spans: list[tuple[int, int]] = []
    for tok in example.tokens[:seq_len]:
        pieces = tokenizer.tokenize(tok)
        if not pieces:
            raise ExtractionError(f"token {tok!r} maps to no wordpieces")
        piece_ids = tokenizer.convert_tokens_to_ids(pieces)
        if len(ids) + len(piece_ids) + 1 > seq_len:   # leave room for [SEP]
            break
        spans.append((len(ids), len(ids) + len(piece_ids)))
        ids.extend(piece_ids)
    ids.append(tokenizer.sep_token_id)
    return _Encoded(example=example, input_ids=ids, spans=spans)


def _record_array(hidden_states, row: int, enc: _Encoded, layers: int,
                  seq_len: int, hidden: int, pool: str) -> np.ndarray:
    arr = np.zeros((layers, seq_len, hidden), dtype=np.float32)
    for layer in range(layers):
        states = hidden_states[-(layer + 1)][row]   # [positions, hidden]
        for t, (start, end) in enumerate(enc.spans):
            if pool == "mean":
                vec = states[start:end].mean(dim=0)
            else:
                vec = states[start]
            arr[layer, t] = vec.numpy()
    return arr


def extract(job: ExtractionJob, log=None) -> ExtractResult:
    """Extract features for every example; returns counts and skip ids.

    The output file appears atomically: records go to a temp file that
    is renamed over ``job.out`` only after the last record.
    """
    log = log or (lambda msg: print(msg, file=sys.stderr))
    if job.pool not in ("first", "mean"):
        raise ExtractionError(f"unknown pooling {job.pool!r}")
    examples = load_examples(job.data, job.format)
    tokenizer = AutoTokenizer.from_pretrained(job.model)
    model = AutoModel.from_pretrained(job.model)
    model.eval()
    hidden = model.config.hidden_size
    if job.layers > model.config.num_hidden_layers:
        raise ExtractionError(
            f"model has {model.config.num_hidden_layers} layers, "
            f"requested {job.layers}")

    result = ExtractResult(hidden=hidden)
    encoded: list[_Encoded] = []
    for ex in examples:
        try:
            encoded.append(_encode(ex, tokenizer, job.seq_len))
        except ExtractionError as e:
            result.skipped.append(ex.id)
            log(f"skipping {ex.id}: {e}")

    def records():
        pad_id = tokenizer.pad_token_id or 0
        for start in range(0, len(encoded), job.batch_size):
            batch = encoded[start:start + job.batch_size]
            width = max(len(e.input_ids) for e in batch)
            input_ids = torch.full((len(batch), width), pad_id, dtype=torch.long)
            mask = torch.zeros((len(batch), width), dtype=torch.long)
            for row, enc in enumerate(batch):
                input_ids[row, :len(enc.input_ids)] = torch.tensor(enc.input_ids)
                mask[row, :len(enc.input_ids)] = 1
            with torch.no_grad():
                out = model(input_ids=input_ids, attention_mask=mask,
                            output_hidden_states=True)
            for row, enc in enumerate(batch):
                yield enc.example.id, _record_array(
                    out.hidden_states, row, enc, job.layers,
                    job.seq_len, hidden, job.pool)

    tmp = str(job.out) + ".tmp"
    try:
        with open(tmp, "wb") as f:
            result.written = write_records(f, records(), job.layers,
                                           job.seq_len, hidden)
        os.replace(tmp, job.out)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return result
