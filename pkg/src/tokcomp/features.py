"""Per-token input features: GloVe-style embedding tables and the TCF1
binary file of externally extracted multi-layer contextual features.

TCF1 layout (little-endian): magic "TCF1", u32 version=1, u32 L,
u32 T, u32 hidden, u32 record_count; then per record u32 id_len,
id bytes (UTF-8), then L*T*hidden float32 ordered layer-major,
token-major, hidden-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .data import SEQ_LEN, TokenizedExample
from .errors import AlignmentError, ConfigurationError, DataError, FormatError, \
    IntegrityError

TCF_MAGIC = b"TCF1"
TCF_VERSION = 1
BERT_HIDDEN = 768


@dataclass
class EmbeddingTable:
    """Token -> fixed vector map; lookups case-fold and fall back to zeros."""
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)
    skipped_lines: int = 0

    def lookup(self, token: str) -> np.ndarray:
        vec = self.vectors.get(token.lower())
        if vec is None:
            return np.zeros(self.dim, dtype=np.float32)
        return vec


def load_glove(path, dim: int | None = None) -> EmbeddingTable:
    """Parse a 'token v1 ... vdim' text file; bad lines are counted, not fatal.

    With ``dim=None`` the dimensionality is taken from the first line
    (100 for the standard GloVe-100 release).
    """
    table = EmbeddingTable(dim=dim or 0)
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.rstrip("\n").split(" ")
            if dim is None and len(parts) > 1:
                dim = len(parts) - 1
                table.dim = dim
            if len(parts) != (dim or 0) + 1:
                table.skipped_lines += 1
                continue
            try:
                vec = np.array(parts[1:], dtype=np.float32)
            except ValueError:
                table.skipped_lines += 1
                continue
            table.vectors[parts[0].lower()] = vec
    if not table.vectors:
        raise DataError(f"no usable embedding lines in {path}")
    return table


def embed_sequence(table: EmbeddingTable, ex: TokenizedExample,
                   seq_len: int = SEQ_LEN) -> np.ndarray:
    """Feature matrix [dim, seq_len]; padded columns are exactly zero."""
    mat = np.zeros((table.dim, seq_len), dtype=np.float32)
    for t, tok in enumerate(ex.tokens[:seq_len]):
        mat[:, t] = table.lookup(tok)
    return mat


def write_feature_file(path, records: Iterable[tuple[str, np.ndarray]],
                       layers: int, seq_len: int = SEQ_LEN,
                       hidden: int = BERT_HIDDEN) -> int:
    """Write records of (id, array[L, T, hidden]) to a TCF1 file.

    The record count is back-patched into the header; returns it.
    """
    count = 0
    with open(path, "wb") as f:
        f.write(TCF_MAGIC)
        f.write(struct.pack("<5I", TCF_VERSION, layers, seq_len, hidden, 0))
        for rec_id, arr in records:
            arr = np.asarray(arr, dtype="<f4")
            if arr.shape != (layers, seq_len, hidden):
                raise DataError(
                    f"record {rec_id}: shape {arr.shape} != {(layers, seq_len, hidden)}")
            blob = rec_id.encode("utf-8")
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(np.ascontiguousarray(arr).tobytes())
            count += 1
        f.seek(len(TCF_MAGIC) + 4 * 4)
        f.write(struct.pack("<I", count))
    return count


@dataclass
class TcfHeader:
    layers: int
    seq_len: int
    hidden: int
    record_count: int


def read_header(f) -> TcfHeader:
    blob = f.read(len(TCF_MAGIC) + 5 * 4)
    if len(blob) < len(TCF_MAGIC) + 5 * 4 or blob[:len(TCF_MAGIC)] != TCF_MAGIC:
        raise FormatError("not a TCF1 feature file")
    version, layers, seq_len, hidden, count = struct.unpack("<5I", blob[len(TCF_MAGIC):])
    if version != TCF_VERSION:
        raise FormatError(f"unsupported TCF version {version}")
    return TcfHeader(layers=layers, seq_len=seq_len, hidden=hidden, record_count=count)


def read_feature_file(path, layers: int) -> Iterator[tuple[str, np.ndarray]]:
    """Stream (id, matrix[hidden*layers, T]) records.

    The first ``layers`` stored layers (layer -1 first) are concatenated
    along the channel axis per token. Never holds more than one record.
    """
    with open(path, "rb") as f:
        header = read_header(f)
        if layers < 1 or layers > header.layers:
            raise ConfigurationError(
                f"requested {layers} layers, file stores {header.layers}")
        rec_floats = header.layers * header.seq_len * header.hidden
        for i in range(header.record_count):
            len_blob = f.read(4)
            if len(len_blob) != 4:
                raise IntegrityError(f"truncated at record {i}")
            (id_len,) = struct.unpack("<I", len_blob)
            rec_id = f.read(id_len).decode("utf-8")
            blob = f.read(4 * rec_floats)
            if len(blob) != 4 * rec_floats:
                raise IntegrityError(f"truncated at record {i} ({rec_id})")
            arr = np.frombuffer(blob, dtype="<f4").reshape(
                header.layers, header.seq_len, header.hidden)
            # [L, T, H] -> [L, H, T] -> [L*H, T]
            mat = np.ascontiguousarray(arr[:layers].transpose(0, 2, 1)).reshape(
                layers * header.hidden, header.seq_len)
            yield rec_id, mat
        if f.read(1):
            raise IntegrityError("trailing bytes after last record")


# --------------------------------------------------------------------------
# feature providers: one uniform interface for the training harness

class FeatureProvider:
    """Maps a TokenizedExample to its [dim, T] input matrix."""

    dim: int
    name: str = "features"
    layers: int = 0

    def matrix(self, ex: TokenizedExample) -> np.ndarray:
        raise NotImplementedError


class GloveFeatures(FeatureProvider):
    def __init__(self, table: EmbeddingTable, seq_len: int = SEQ_LEN):
        self.table = table
        self.seq_len = seq_len
        self.dim = table.dim
        self.name = "glove"

    def matrix(self, ex: TokenizedExample) -> np.ndarray:
        return embed_sequence(self.table, ex, self.seq_len)


class TcfFeatures(FeatureProvider):
    """Contextual features loaded from a TCF1 file, keyed by example id."""

    def __init__(self, path, layers: int):
        self.path = path
        self.layers = layers
        self.records: dict[str, np.ndarray] = {}
        dim = None
        for rec_id, mat in read_feature_file(path, layers):
            self.records[rec_id] = mat
            dim = mat.shape[0]
        if dim is None:
            raise DataError(f"feature file {path} has no records")
        self.dim = dim
        self.name = f"tcf:L{layers}"

    def matrix(self, ex: TokenizedExample) -> np.ndarray:
        mat = self.records.get(ex.id)
        if mat is None:
            raise AlignmentError(f"no feature record for example id {ex.id!r}")
        return mat
