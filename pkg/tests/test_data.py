"""Dataset parsing, mask derivation, padding, and split tests."""

from __future__ import annotations

import json

import numpy as np
import pytest

from tokcomp import data
from tokcomp.data import RawPair, SplitSpec, TokenizedExample, compression_text, \
    derive_corpus, derive_mask, load_dataset, pad_truncate, split_dataset, tokenize
from tokcomp.errors import AlignmentError, EmptyDatasetError, ParseError


class TestTokenize:
    def test_terminal_punctuation_split(self):
        assert tokenize("Hello, world.") == ["Hello", ",", "world", "."]

    def test_double_space(self):
        assert tokenize("a  b") == ["a", "b"]

    def test_round_trip_up_to_whitespace(self):
        texts = ["Police arrested the man.", "He said , wait!", "One  two\tthree"]
        for text in texts:
            joined = " ".join(tokenize(text))
            assert joined.replace(" ", "") == "".join(text.split()).replace("", "")
            assert " ".join(joined.split()) == joined


class TestLoadTsv:
    def test_parse_line(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("Police arrested the man\t1 1 0 1\n")
        records = load_dataset(path, "tsv_labeled")
        assert records[0].tokens == ["Police", "arrested", "the", "man"]
        np.testing.assert_array_equal(records[0].labels, [1, 1, 0, 1])

    def test_count_mismatch_reports_line(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("a b\t1 1\nc d\t1\n")
        with pytest.raises(ParseError, match="line 2"):
            load_dataset(path, "tsv_labeled")

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("")
        with pytest.raises(EmptyDatasetError):
            load_dataset(path, "tsv_labeled")

    def test_order_preserved(self, tmp_path):
        lines = [f"tok{i} x\t1 0" for i in range(20)]
        path = tmp_path / "d.tsv"
        path.write_text("\n".join(lines) + "\n")
        records = load_dataset(path, "tsv_labeled")
        assert [r.tokens[0] for r in records] == [f"tok{i}" for i in range(20)]


class TestLoadPairs:
    def test_parse(self, tmp_path):
        path = tmp_path / "d.jsonl"
        rows = [{"original": "a b c", "compressed": "a c", "id": "r1"}]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        records = load_dataset(path, "pairs_json")
        assert records[0].id == "r1"
        assert records[0].compressed == "a c"

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text('{"original": "a", "compressed": "a"}\n{oops\n')
        with pytest.raises(ParseError, match="line 2"):
            load_dataset(path, "pairs_json")


class TestDeriveMask:
    def test_unique_alignment(self):
        ex = derive_mask(RawPair("a b c d", "b d", "x"))
        np.testing.assert_array_equal(ex.labels, [0, 1, 0, 1])

    def test_greedy_leftmost(self):
        ex = derive_mask(RawPair("a a b", "a b", "x"))
        np.testing.assert_array_equal(ex.labels, [1, 0, 1])

    def test_identical_pair_all_ones(self):
        ex = derive_mask(RawPair("x y z", "x y z", "x"))
        assert ex.labels.sum() == 3

    def test_not_subsequence_rejected(self):
        with pytest.raises(AlignmentError):
            derive_mask(RawPair("a b c", "c a", "x"))

    def test_compression_round_trip(self):
        pair = RawPair("Police arrested the man today.", "Police arrested man.", "x")
        ex = derive_mask(pair)
        assert compression_text(ex) == " ".join(tokenize(pair.compressed))

    def test_skip_rate_counted(self, rng):
        pairs = []
        for i in range(200):
            if i % 10 == 0:  # corrupted: compressed not a subsequence
                pairs.append(RawPair("a b c", "z", str(i)))
            else:
                pairs.append(RawPair("a b c d", "b d", str(i)))
        stats = data.DatasetStats()
        kept = derive_corpus(pairs, stats)
        assert stats.skipped_alignment == 20
        assert len(kept) == 180


class TestPadTruncate:
    def make(self, n):
        return TokenizedExample(tokens=[f"t{i}" for i in range(n)],
                                labels=np.ones(n, dtype=np.int64),
                                pad_mask=np.ones(n, dtype=np.int64),
                                original_length=n, id="x")

    def test_pad_short(self):
        ex = pad_truncate(self.make(10))
        assert len(ex.labels) == 64 and ex.pad_mask.sum() == 10
        assert len(ex.tokens) == 10 and not ex.truncated
        assert ex.labels[10:].sum() == 0

    def test_truncate_long(self):
        stats = data.DatasetStats()
        ex = pad_truncate(self.make(70), stats=stats)
        assert len(ex.tokens) == 64 and ex.truncated
        assert stats.truncated == 1

    def test_empty_rejected(self):
        with pytest.raises(EmptyDatasetError):
            pad_truncate(self.make(0))


class TestSplits:
    def test_sizes_and_disjointness(self):
        examples = [self_ex(i) for i in range(10_000)]
        splits = split_dataset(examples)
        assert [len(splits[k]) for k in ("test", "validation", "train")] \
            == [1000, 1000, 8000]
        ids = [ex.id for part in ("test", "validation", "train")
               for ex in splits[part]]
        assert ids == [str(i) for i in range(10_000)]  # file order, exhaustive

    def test_too_small_rejected(self):
        with pytest.raises(EmptyDatasetError):
            split_dataset([self_ex(0)], SplitSpec(test_size=1, validation_size=1))


def self_ex(i):
    return TokenizedExample(tokens=["a"], labels=np.ones(1, dtype=np.int64),
                            pad_mask=np.ones(1, dtype=np.int64),
                            original_length=1, id=str(i))
