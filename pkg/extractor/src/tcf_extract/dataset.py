"""Minimal readers for the two dataset formats the trainer accepts.

Record ids must line up with the trainer's own loader: TSV examples get
their zero-based record index as id, JSON pairs use their "id" field
(falling back to the index). Tokenization matches the trainer too,
whitespace split with terminal punctuation peeled into separate tokens.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

_TERMINAL_PUNCT = set(".,!?;:")


class DatasetError(Exception):
    pass


@dataclass
class DatasetExample:
    id: str
    tokens: list[str]


def tokenize(text: str) -> list[str]:
    out: list[str] = []
    for chunk in text.split():
        tail: list[str] = []
        while len(chunk) > 1 and chunk[-1] in _TERMINAL_PUNCT:
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        out.append(chunk)
        out.extend(reversed(tail))
    return out


def load_examples(path, format: str = "tsv_labeled") -> list[DatasetExample]:
    if format == "tsv_labeled":
        return _load_tsv(path)
    if format == "pairs_json":
        return _load_pairs(path)
    raise DatasetError(f"unknown dataset format {format!r}")


def _load_tsv(path) -> list[DatasetExample]:
    out: list[DatasetExample] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0].split():
                raise DatasetError(f"line {lineno}: expected 'tokens<TAB>labels'")
            out.append(DatasetExample(id=str(len(out)), tokens=parts[0].split()))
    if not out:
        raise DatasetError(f"no records in {path}")
    return out


def _load_pairs(path) -> list[DatasetExample]:
    out: list[DatasetExample] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                original = obj["original"]
            except (json.JSONDecodeError, KeyError) as e:
                raise DatasetError(f"line {lineno}: {e}") from None
            out.append(DatasetExample(id=str(obj.get("id", len(out))),
                                      tokens=tokenize(original)))
    if not out:
        raise DatasetError(f"no records in {path}")
    return out
